#include "dmldeep/dataset_io.hpp"
#include "dmldeep/dgp.hpp"
#include "dmldeep/error.hpp"
#include "dmldeep/metrics.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace dmldeep;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

std::vector<Vector> unit_targets(std::size_t k, Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::vector<Vector> out;
  for (std::size_t j = 0; j < k; ++j) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = z(gen);
    out.push_back(standardize_target(v));
  }
  return out;
}

// R^2 of an OLS fit with intercept, via the normal equations.
double fit_r2(const Vector& y, const Vector& x) {
  const double b = covariance(x, y) / variance(x);
  return 1.0 - variance(y - b * x) / variance(y);
}

}  // namespace

TEST_SUITE("dgp") {
  TEST_CASE("standardize_target examples") {
    const Vector a = standardize_target(vec({0, 1, 0, 1}));
    CHECK(a.isApprox(vec({-1, 1, -1, 1})));
    const Vector b = standardize_target(vec({1, 2, 3}));
    CHECK(b[0] == doctest::Approx(-std::sqrt(1.5)));
    CHECK(b[1] == doctest::Approx(0.0));
    CHECK(b[2] == doctest::Approx(std::sqrt(1.5)));
    CHECK_THROWS_AS(standardize_target(vec({2, 2, 2})), DegenerateError);
  }

  TEST_CASE("confounder scales under the structural convention") {
    const auto t3 = unit_targets(3, 5000, 1);
    const auto c3 = build_confounders(t3, 0.5, 2.0, SnrConvention::structural);
    Vector z = t3[0] + t3[1] + t3[2];
    const double vz = variance(z);
    CHECK(c3.lambda == doctest::Approx(std::sqrt(2.0 / vz)));
    CHECK(c3.mu == doctest::Approx(1.5 * std::sqrt(2.0 / vz)));

    const auto [l3, m3] = confounding_scales(3.0, 0.5, 2.0, SnrConvention::structural);
    CHECK(l3 == doctest::Approx(0.816496580927726));
    CHECK(m3 == doctest::Approx(1.224744871391589));
    const auto [l1, m1] = confounding_scales(1.0, 0.5, 2.0, SnrConvention::structural);
    CHECK(l1 == doctest::Approx(std::sqrt(2.0)));
    CHECK(m1 == doctest::Approx(1.5 * std::sqrt(2.0)));
    const auto [l0, m0] = confounding_scales(3.0, 0.0, 2.0, SnrConvention::structural);
    CHECK(m0 == doctest::Approx(l0));
  }

  TEST_CASE("confounder scales under the total_signal convention") {
    const auto [l, m] = confounding_scales(3.0, 0.5, 2.0, SnrConvention::total_signal);
    CHECK(l == doctest::Approx(std::sqrt(2.0 / 3.0)));
    CHECK(m == doctest::Approx(0.5 * std::sqrt(2.0 / 3.0) + std::sqrt(1.75 / 3.0)));
    CHECK_THROWS_AS(confounding_scales(3.0, 2.0, 2.0, SnrConvention::total_signal), ValidationError);
    CHECK_THROWS_AS(confounding_scales(0.0, 0.5, 2.0, SnrConvention::total_signal), DegenerateError);
  }

  TEST_CASE("confounders hit their variance targets exactly in sample") {
    for (std::uint64_t seed : {1, 2, 3}) {
      for (auto conv : {SnrConvention::structural, SnrConvention::total_signal}) {
        const auto t = unit_targets(1 + seed % 3, 2000, seed);
        for (double theta0 : {0.0, 0.5, -0.8}) {
          const auto c = build_confounders(t, theta0, 2.0, conv);
          CHECK(variance(c.m0) == doctest::Approx(2.0).epsilon(1e-9));
          const double target = conv == SnrConvention::structural ? 2.0 : 2.0 - theta0 * theta0;
          CHECK(variance(theta0 * c.m0 + c.g0) == doctest::Approx(target).epsilon(1e-9));
          CHECK(covariance(c.g0, c.m0) < 0.0);
        }
      }
    }
  }

  TEST_CASE("generated data follows the model") {
    const auto data = testing::small_dataset(3000, 5, 0.7, 3);
    CHECK(validate(data).empty());
    const auto& o = *data.oracle;
    CHECK(variance(o.m0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(variance(0.5 * o.m0 + o.g0) == doctest::Approx(1.75).epsilon(1e-9));
    CHECK((data.y - 0.5 * data.d - o.g0 - o.eps).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((data.d - o.m0 - o.nu).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(data.manifest.modality_specs.size() == 3);
    CHECK(data.blocks.size() == 3);
    CHECK(data.blocks[0].values.cols() == 3);
  }

  TEST_CASE("surrogate features explain the stated share of each target") {
    for (double rho : {0.3, 0.9}) {
      const auto data = testing::small_dataset(10000, 8, rho, 5);
      for (const auto& name : {"tab", "txt", "img"}) {
        const Vector& t = *data.oracle->target(name);
        const Vector& f = *data.oracle->feasible_target(name);
        CHECK(std::abs(fit_r2(t, f) - rho) < 0.02);
        // The feasible column is linear in the features.
        const Matrix& x = data.block(name)->values;
        const Vector w = (x.transpose() * x).ldlt().solve(x.transpose() * f);
        CHECK((x * w - f).cwiseAbs().maxCoeff() < 1e-9);
      }
    }
  }

  TEST_CASE("tanh link keeps unit target variance") {
    auto cfg = default_dgp_config(20000, 4, 1.0, 4);
    for (auto& s : cfg.modality_specs) s.link = Link::tanh;
    const auto data = generate(cfg);
    CHECK(variance(*data.oracle->target("txt")) == doctest::Approx(1.0).epsilon(0.03));
  }

  TEST_CASE("generation is deterministic and seed sensitive") {
    const auto a = testing::small_dataset(200, 11);
    const auto b = testing::small_dataset(200, 11);
    const auto c = testing::small_dataset(200, 12);
    CHECK(a.y == b.y);
    CHECK(a.blocks[2].values == b.blocks[2].values);
    CHECK(a.y != c.y);
  }

  TEST_CASE("attenuated plim examples") {
    auto cfg = default_dgp_config(100, 0, 1.0, 4);
    CHECK(attenuated_theta_plim(cfg) == doctest::Approx(0.5));
    cfg.snr_convention = SnrConvention::structural;
    for (auto& s : cfg.modality_specs) s.explainable_fraction = 0.9;
    CHECK(attenuated_theta_plim(cfg) == doctest::Approx(0.25));
    for (auto& s : cfg.modality_specs) s.explainable_fraction = 0.0;
    CHECK(attenuated_theta_plim(cfg) == doctest::Approx(-0.5));
  }

  TEST_CASE("with nothing explainable the plim equals the population OLS slope") {
    for (auto conv : {SnrConvention::structural, SnrConvention::total_signal}) {
      auto cfg = default_dgp_config(100, 0, 0.0, 4);
      cfg.snr_convention = conv;
      const auto [lambda, mu] = confounding_scales(3.0, cfg.theta0, cfg.snr, conv);
      const double ols = cfg.theta0 - lambda * mu * 3.0 / (lambda * lambda * 3.0 + 1.0);
      CHECK(attenuated_theta_plim(cfg) == doctest::Approx(ols));
    }
  }

  TEST_CASE("plim matches a large-sample estimate on feasible nuisances") {
    auto cfg = default_dgp_config(100000, 21, 0.6, 2);
    const auto data = generate(cfg);
    const auto [l, m] = feasible_nuisances(data);
    const Vector ry = data.y - l;
    const Vector rd = data.d - m;
    const double theta = ry.dot(rd) / rd.squaredNorm();
    CHECK(std::abs(theta - attenuated_theta_plim(cfg)) < 0.03);
  }

  TEST_CASE("oracle bounds") {
    const auto full = testing::small_dataset(20000, 2, 1.0, 3);
    const auto b = oracle_bounds(full);
    REQUIRE(b.feasible_r2_d);
    CHECK(*b.feasible_r2_d == doctest::Approx(b.r2_d).epsilon(1e-9));
    CHECK(*b.feasible_r2_y == doctest::Approx(b.r2_y).epsilon(1e-9));
    CHECK(b.r2_d == doctest::Approx(2.0 / 3.0).epsilon(0.03));
    CHECK(b.rmse_d == doctest::Approx(1.0).epsilon(0.03));
    CHECK(b.rmse_y == doctest::Approx(std::sqrt(1.25)).epsilon(0.03));

    const auto none = oracle_bounds(testing::small_dataset(20000, 2, 0.0, 3));
    CHECK(std::abs(*none.feasible_r2_d) < 1e-3);
    CHECK(std::abs(*none.feasible_r2_y) < 1e-3);
  }

  TEST_CASE("descriptives") {
    const auto s = describe(vec({1, 2, 3, 4, 5}));
    CHECK(s.count == 5);
    CHECK(s.mean == doctest::Approx(3));
    CHECK(s.std == doctest::Approx(std::sqrt(2.5)));
    CHECK(s.q25 == doctest::Approx(2));
    CHECK(s.max == 5);
    const auto txt = format_descriptives(descriptives(testing::small_dataset(50)));
    CHECK(txt.find("count") != std::string::npos);
    CHECK(txt.find("75%") != std::string::npos);
  }

  TEST_CASE("config checks") {
    auto cfg = default_dgp_config(100, 0);
    SUBCASE("small n") { cfg.n = 5; }
    SUBCASE("snr") { cfg.snr = 0; }
    SUBCASE("total signal below theta0^2") { cfg.theta0 = 2; }
    SUBCASE("duplicate name") { cfg.modality_specs[1].name = "tab"; }
    SUBCASE("bad name") { cfg.modality_specs[1].name = "a:b"; }
    SUBCASE("fraction") { cfg.modality_specs[0].explainable_fraction = 1.5; }
    SUBCASE("feature dim") { cfg.modality_specs[0].feature_dim = 0; }
    SUBCASE("no modalities") { cfg.modality_specs.clear(); }
    CHECK_THROWS_AS(generate(cfg), ValidationError);
  }

  TEST_CASE("ingest mode reads targets and features from files") {
    const auto dir = testing::temp_dir("ingest");
    std::string cat = "id,target,a,b\n", bin = "id,target\n";
    const char* labels[] = {"cat", "dog", "bird"};
    for (int i = 0; i < 30; ++i) {
      const std::string id = "r" + std::to_string(i);
      cat += id + "," + labels[(i * 7) % 3] + "," + std::to_string(i) + "," + std::to_string(i % 4) + "\n";
      bin += id + "," + std::to_string(i % 2) + "\n";
    }
    write_text_file(dir / "cat.csv", cat);
    write_text_file(dir / "bin.csv", bin);

    DgpConfig cfg;
    cfg.n = 30;
    cfg.mode = DgpMode::ingest;
    ModalitySpec a;
    a.name = "pet";
    a.target_kind = TargetKind::categorical;
    a.target_path = (dir / "cat.csv").string();
    ModalitySpec b;
    b.name = "flag";
    b.target_kind = TargetKind::binary;
    b.target_path = (dir / "bin.csv").string();
    cfg.modality_specs = {a, b};
    const auto data = generate(cfg);
    CHECK(validate(data).empty());
    CHECK(data.id(3) == "r3");
    const auto* spec = data.manifest.find_spec("pet");
    CHECK(spec->categories == 3);
    CHECK(spec->category_codes == std::vector<std::string>{"cat", "dog", "bird"});
    CHECK((*data.oracle->target("pet"))[2] == 2.0);
    CHECK(data.block("pet")->values.cols() == 2);
    CHECK(data.block("flag") == nullptr);
    CHECK(spec->feature_dim == 2);
    CHECK(data.manifest.find_spec("flag")->feature_dim == 0);

    std::string bad = "id,target\n";
    for (int i = 0; i < 30; ++i) bad += "r" + std::to_string(i) + "," + std::to_string(i % 3) + "\n";
    write_text_file(dir / "bin.csv", bad);
    CHECK_THROWS_AS(generate(cfg), ValidationError);
  }
}
