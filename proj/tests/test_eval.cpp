#include "dmldeep/dgp.hpp"
#include "dmldeep/error.hpp"
#include "dmldeep/eval.hpp"
#include "dmldeep/metrics.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace dmldeep;

namespace {

FusionParams quick_fusion(std::size_t epochs) {
  FusionParams p;
  p.arch.encoder_widths = {8};
  p.arch.embedding_dim = 4;
  p.epochs = epochs;
  return p;
}

SplitScheme two_repeats() {
  SplitScheme s;
  s.repeats = 2;
  s.seed = 4;
  return s;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("benchmark rows follow the roster") {
    const auto data = testing::small_dataset(600, 2, 0.8, 3);
    const std::vector<ModelEntry> roster{{"Oracle", {OracleParams{}, 0}, data.modality_names()},
                                         {"Ridge", {RidgeParams{}, 0}, {"tab"}},
                                         {"Flat", {ConstantParams{}, 0}, data.modality_names()}};
    const auto rep = run_benchmark(data, roster, two_repeats(), 1, "abc");
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[0].name == "Oracle");
    CHECK(rep.rows[1].learner == "ridge");
    CHECK(rep.rows[1].modalities == std::vector<std::string>{"tab"});
    CHECK(rep.rows[0].repeats == 2);
    CHECK(rep.rows[0].theta_values.size() == 2);
    CHECK(rep.rows[0].r2_y_rel->mean == doctest::Approx(1.0));
    CHECK(rep.rows[0].r2_d_rel->mean == doctest::Approx(1.0));
    CHECK(rep.rows[2].r2_d_rel->mean < 0.01);
    CHECK(rep.rows[1].r2_d_rel->mean < rep.rows[0].r2_d_rel->mean);
    CHECK(rep.config_digest == "abc");
    CHECK(rep.scheme == two_repeats().describe());

    const auto j = report_to_json(rep);
    CHECK(j["rows"].size() == 3);
    CHECK(j["bounds"]["theta0"] == 0.5);
  }

  TEST_CASE("benchmark input checks") {
    const auto data = testing::small_dataset(100);
    CHECK_THROWS_AS(run_benchmark(data, {}, two_repeats()), ValidationError);
    const std::vector<ModelEntry> dup{{"A", {OracleParams{}, 0}, {"tab"}}, {"A", {OracleParams{}, 0}, {"tab"}}};
    CHECK_THROWS_AS(run_benchmark(data, dup, two_repeats()), ValidationError);
  }

  TEST_CASE("bounds come from the full dataset") {
    const auto data = testing::small_dataset(2000, 3, 0.9, 2);
    const auto b = benchmark_bounds(data);
    CHECK(b.theta0 == 0.5);
    CHECK(b.ols_theta == doctest::Approx(ols_baseline(data.y, data.d)));
    CHECK(*b.oracle_r2_d == doctest::Approx(r_squared(data.d, data.oracle->m0)));
    REQUIRE(b.attenuated_plim);
    auto cfg = default_dgp_config(2000, 3, 0.9, 2);
    CHECK(*b.attenuated_plim == doctest::Approx(attenuated_theta_plim(cfg)));
    auto bare = data;
    bare.oracle.reset();
    CHECK(!benchmark_bounds(bare).oracle_r2_y);
  }

  TEST_CASE("epoch trace from a hand-made log") {
    const auto data = testing::small_dataset(200, 4);
    const auto& o = *data.oracle;
    TrainingLog log;
    for (std::size_t e = 1; e <= 3; ++e) {
      EpochRecord r;
      r.epoch = e;
      r.holdout_l_hat = o.l0 * (static_cast<double>(e) / 3.0);
      r.holdout_m_hat = o.m0 * (static_cast<double>(e) / 3.0);
      log.epochs.push_back(r);
    }
    const auto t = epoch_trace(log, data.y, data.d, &o.l0, &o.m0);
    REQUIRE(t.points.size() == 3);
    CHECK(t.points[2].r2_y_rel.value() == doctest::Approx(1.0));
    NuisancePredictions p;
    p.l_hat = o.l0;
    p.m_hat = o.m0;
    p.fold_id.assign(200, 0);
    const auto e = solve_theta(p, data.y, data.d);
    CHECK(t.points[2].theta_hat == doctest::Approx(e.theta_hat));
    CHECK(t.points[2].ci_low == doctest::Approx(e.ci_low));
    CHECK(!epoch_trace(log, data.y, data.d).points[0].r2_y_rel);

    CHECK_THROWS_AS(epoch_trace(TrainingLog{}, data.y, data.d), ValidationError);
    auto missing = log;
    missing.epochs[1].holdout_l_hat.resize(0);
    CHECK_THROWS_AS(epoch_trace(missing, data.y, data.d), ValidationError);
    auto unordered = log;
    unordered.epochs[2].epoch = 1;
    CHECK_THROWS_AS(epoch_trace(unordered, data.y, data.d), ValidationError);
  }

  TEST_CASE("trace run has one point per epoch and ends at the returned network") {
    const auto data = testing::small_dataset(800, 5, 0.9, 3);
    const auto run = run_trace(data, quick_fusion(6), 7, 0.5, 3, data.modality_names());
    REQUIRE(run.trace.points.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(run.trace.points[i].epoch == i + 1);
    CHECK(run.trace.points.back().theta_hat == doctest::Approx(run.split.estimate.theta_hat).epsilon(1e-12));
    CHECK(run.split.eval_rows == split_rows(800, 0.5, 3).second);
    CHECK(run.trace.points.back().r2_d_rel);
  }
}
