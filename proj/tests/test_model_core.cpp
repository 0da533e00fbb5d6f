#include "dmldeep/types.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace dmldeep;

TEST_SUITE("model_core") {
  TEST_CASE("generated dataset has no violations") {
    const auto data = testing::small_dataset();
    CHECK(validate(data).empty());
  }

  TEST_CASE("NaN in y[3] is reported with field and row") {
    auto data = testing::small_dataset();
    data.y[3] = std::numeric_limits<double>::quiet_NaN();
    const auto v = validate(data);
    REQUIRE(!v.empty());
    CHECK(v.front() == Violation{"y", Index{3}, "non-finite"});
  }

  TEST_CASE("broken oracle identity at row 0") {
    auto data = testing::small_dataset();
    data.oracle->l0[0] += 1e-3;
    const auto v = validate(data);
    REQUIRE(v.size() == 1);
    CHECK(v.front() == Violation{"l0", Index{0}, "identity"});
  }

  TEST_CASE("identity tolerance is relative 1e-12") {
    auto data = testing::small_dataset();
    data.oracle->l0[5] *= 1 + 1e-15;
    CHECK(validate(data).empty());
    data.oracle->l0[5] += 1e-9;
    CHECK(!validate(data).empty());
  }

  TEST_CASE("y and d identities are checked") {
    auto data = testing::small_dataset();
    data.d[7] += 0.5;
    const auto v = validate(data);
    bool saw_d = false;
    for (const auto& x : v) saw_d = saw_d || (x.field == "d" && x.row == Index{7} && x.kind == "identity");
    CHECK(saw_d);
  }

  TEST_CASE("structural violations") {
    auto data = testing::small_dataset();
    SUBCASE("short block") {
      data.blocks[0].values.conservativeResize(data.n() - 1, Eigen::NoChange);
      CHECK(!validate(data).empty());
    }
    SUBCASE("duplicate modality") {
      data.blocks.push_back(data.blocks[0]);
      CHECK(!validate(data).empty());
    }
    SUBCASE("rho out of range") {
      data.manifest.modality_specs[0].explainable_fraction = 1.5;
      CHECK(!validate(data).empty());
    }
    SUBCASE("categorical with k < 2") {
      data.manifest.modality_specs[0].target_kind = TargetKind::categorical;
      data.manifest.modality_specs[0].categories = 1;
      CHECK(!validate(data).empty());
    }
    SUBCASE("nonpositive scale") {
      data.manifest.scale_m = 0;
      CHECK(!validate(data).empty());
    }
    SUBCASE("n below 2") {
      const std::vector<std::size_t> one{0};
      CHECK(!validate(data.subset(one)).empty());
    }
    SUBCASE("infinite feature") {
      data.blocks[1].values(2, 1) = std::numeric_limits<double>::infinity();
      const auto v = validate(data);
      REQUIRE(v.size() == 1);
      CHECK(v.front().row == Index{2});
    }
  }

  TEST_CASE("subset keeps rows, oracle and invariants") {
    const auto data = testing::small_dataset();
    const std::vector<std::size_t> rows{5, 2, 9};
    const auto s = data.subset(rows);
    CHECK(s.n() == 3);
    CHECK(s.y[0] == data.y[5]);
    CHECK(s.blocks[1].values(2, 0) == data.blocks[1].values(9, 0));
    CHECK(s.oracle->m0[1] == data.oracle->m0[2]);
    CHECK(s.id(0) == "5");
    CHECK(validate(s).empty());
  }

  TEST_CASE("stack_features concatenates blocks in order") {
    const auto data = testing::small_dataset(50, 2, 1.0, 3);
    const Matrix x = stack_features(data, {"txt", "tab"});
    CHECK(x.cols() == 6);
    CHECK(x(4, 0) == data.block("txt")->values(4, 0));
    CHECK(x(4, 3) == data.block("tab")->values(4, 0));
  }

  TEST_CASE("in-sample flag") {
    NuisancePredictions p;
    p.l_hat = Vector::Zero(3);
    p.m_hat = Vector::Zero(3);
    p.fold_id = {0, 1, 0};
    CHECK(p.out_of_sample());
    p.fold_id[1] = -1;
    CHECK(!p.out_of_sample());
  }

  TEST_CASE("enum names round trip") {
    for (auto k : {TargetKind::continuous, TargetKind::binary, TargetKind::categorical})
      CHECK(target_kind_from_string(to_string(k)) == k);
    for (auto l : {Link::linear, Link::tanh}) CHECK(link_from_string(to_string(l)) == l);
    for (auto c : {SnrConvention::total_signal, SnrConvention::structural})
      CHECK(snr_convention_from_string(to_string(c)) == c);
    CHECK_THROWS(link_from_string("cubic"));
  }
}
