#include "dmldeep/error.hpp"
#include "dmldeep/learners.hpp"
#include "dmldeep/metrics.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace dmldeep;

namespace {

FusionParams quick_fusion() {
  FusionParams p;
  p.arch.encoder_widths = {8};
  p.arch.embedding_dim = 4;
  p.epochs = 4;
  return p;
}

std::vector<LearnerSpec> all_specs() {
  GbtParams g;
  g.trees = 20;
  EmbeddingParams e;
  e.fusion = quick_fusion();
  e.gbt = g;
  return {{RidgeParams{}, 1}, {g, 2}, {quick_fusion(), 3}, {e, 4}, {OracleParams{}, 5}, {ConstantParams{}, 6}};
}

}  // namespace

TEST_SUITE("learners") {
  TEST_CASE("every learner predicts finite values with the right fold tags") {
    const auto all = testing::small_dataset(300, 2);
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < 300; ++i) (i % 2 ? a : b).push_back(i);
    const auto train = all.subset(a);
    const auto test = all.subset(b);
    for (const auto& spec : all_specs()) {
      CAPTURE(spec.kind_name());
      const auto f = fit(spec, train, all.modality_names());
      const auto out = predict(*f, test, 3);
      CHECK(out.size() == test.n());
      CHECK(out.l_hat.allFinite());
      CHECK(out.out_of_sample());
      CHECK(std::all_of(out.fold_id.begin(), out.fold_id.end(), [](int k) { return k == 3; }));
      const auto in = predict(*f, train, 3);
      CHECK(std::all_of(in.fold_id.begin(), in.fold_id.end(), [](int k) { return k == -1; }));
      CHECK(!in.out_of_sample());
      CHECK(!out.learner_tag.empty());
    }
  }

  TEST_CASE("oracle and constant fixtures") {
    const auto data = testing::small_dataset(100, 3);
    const auto other = testing::small_dataset(50, 4);
    const auto o = predict(*fit({OracleParams{}, 0}, data, {"tab"}), other);
    CHECK(o.l_hat == other.oracle->l0);
    CHECK(o.m_hat == other.oracle->m0);
    const auto c = predict(*fit({ConstantParams{}, 0}, data, {"tab"}), other);
    CHECK(c.l_hat[7] == doctest::Approx(mean(data.y)));
    CHECK(c.m_hat[9] == doctest::Approx(mean(data.d)));
  }

  TEST_CASE("fits are deterministic for a spec") {
    const auto data = testing::small_dataset(200, 5);
    const auto test = testing::small_dataset(80, 6);
    for (const auto& spec : all_specs()) {
      CAPTURE(spec.kind_name());
      const auto p1 = predict(*fit(spec, data, data.modality_names()), test);
      const auto p2 = predict(*fit(spec, data, data.modality_names()), test);
      CHECK(p1.l_hat == p2.l_hat);
      CHECK(p1.m_hat == p2.m_hat);
    }
  }

  TEST_CASE("ridge learner learns the linear nuisances") {
    const auto all = testing::small_dataset(6000, 7, 1.0, 4);
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < 6000; ++i) (i % 3 ? a : b).push_back(i);
    const auto train = all.subset(a);
    const auto test = all.subset(b);
    const auto p = predict(*fit({RidgeParams{0.1}, 0}, train, train.modality_names()), test);
    CHECK(r_squared(test.d, p.m_hat) > 0.95 * r_squared(test.d, test.oracle->m0));
  }

  TEST_CASE("the embedding learner differs from the network it builds on") {
    const auto data = testing::small_dataset(300, 9);
    const auto specs = all_specs();
    const auto fusion = fit(specs[2], data, data.modality_names());
    const auto emb = fit(specs[3], data, data.modality_names());
    REQUIRE(fusion_network(*fusion));
    REQUIRE(fusion_network(*emb));
    CHECK(fusion_network(*fit(specs[0], data, {"tab"})) == nullptr);
    CHECK(predict(*fusion, data).l_hat != predict(*emb, data).l_hat);
    CHECK(std::count(emb->modalities().begin(), emb->modalities().end(), "tab") == 1);
  }

  TEST_CASE("embedding learner checks its network and tabular block") {
    const auto data = testing::small_dataset(100, 10);
    CHECK_THROWS_AS(fit_embedding_model(nullptr, data, GbtParams{}, "tab", 0), ValidationError);
    EmbeddingParams e;
    e.fusion = quick_fusion();
    e.fusion.arch.embedding_dim = 0;
    CHECK_THROWS_AS(fit({e, 0}, data, data.modality_names()), ValidationError);
    e.fusion.arch.embedding_dim = 2;
    e.tabular_modality = "audio";
    CHECK_THROWS_AS(fit({e, 0}, data, data.modality_names()), SchemaError);
  }

  TEST_CASE("errors") {
    const auto data = testing::small_dataset(100, 11, 1.0, 3);
    const LearnerSpec ridge{RidgeParams{}, 0};
    CHECK_THROWS_AS(fit(ridge, data.subset(std::vector<std::size_t>{}), {"tab"}), ValidationError);
    CHECK_THROWS_AS(fit(ridge, data, {}), ValidationError);
    CHECK_THROWS_AS(fit(ridge, data, {"audio"}), SchemaError);
    const auto f = fit(ridge, data, {"tab", "txt"});
    CHECK_THROWS_AS(predict(*f, testing::small_dataset(20, 1, 1.0, 5)), SchemaError);
    CHECK_THROWS_AS(predict(*f, data.subset(std::vector<std::size_t>{})), ValidationError);
    CHECK_THROWS_AS(fit({RidgeParams{-1.0}, 0}, data, {"tab"}), ValidationError);
  }

  TEST_CASE("spec json round trip") {
    for (const auto& spec : all_specs()) {
      const auto j = learner_spec_to_json(spec);
      const auto back = learner_spec_from_json(j);
      CHECK(back.kind_name() == spec.kind_name());
      CHECK(back.seed == spec.seed);
      CHECK(learner_spec_to_json(back) == j);
    }
    CHECK_THROWS_AS(learner_spec_from_json({{"kind", "forest"}}), ValidationError);
    CHECK_THROWS_AS(learner_spec_from_json({{"penalty", 1}}), ValidationError);
    CHECK_THROWS_AS(learner_spec_from_json({{"kind", "fusion"}, {"selection", "best"}}), ValidationError);
    CHECK_THROWS_AS(learner_spec_from_json({{"kind", "gbt"}, {"trees", 0}}), ValidationError);
  }

  TEST_CASE("per-modality encoder widths round trip") {
    FusionParams p = quick_fusion();
    p.arch.encoders = {{"img", {16, 8}}};
    const auto back = learner_spec_from_json(learner_spec_to_json({p, 0}));
    const auto& q = std::get<FusionParams>(back.kind);
    CHECK(q.arch.widths_for("img") == std::vector<std::size_t>{16, 8});
    CHECK(q.arch.widths_for("tab") == std::vector<std::size_t>{8});
  }
}
