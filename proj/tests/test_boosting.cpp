#include "dmldeep/boosting.hpp"
#include "dmldeep/error.hpp"

#include <doctest.h>

#include <random>

using namespace dmldeep;

TEST_SUITE("boosting") {
  TEST_CASE("a single stump on a binary feature recovers the group means") {
    Matrix x(8, 2);
    Vector y(8);
    for (Index i = 0; i < 8; ++i) {
      x(i, 0) = static_cast<double>(i % 2);
      x(i, 1) = 0.0;
      y[i] = i % 2 ? 3.0 : 1.0;
    }
    GbtParams p;
    p.trees = 1;
    p.depth = 1;
    p.learning_rate = 1.0;
    p.min_leaf = 1;
    const auto m = fit_boosted(x, y, p, 0);
    CHECK(m.base == doctest::Approx(2.0));
    REQUIRE(m.trees.size() == 1);
    const auto& root = m.trees[0].nodes[0];
    CHECK(root.feature == 0);
    CHECK(root.threshold > 0.0);
    CHECK(root.threshold < 1.0);
    CHECK((m.predict(x) - y).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(m.train_loss.back() < 1e-20);
    CHECK(m.train_loss.front() == doctest::Approx(1.0));
  }

  TEST_CASE("learning rate shrinks each step") {
    Matrix x(4, 1);
    x << 0, 0, 1, 1;
    Vector y(4);
    y << 0, 0, 2, 2;
    GbtParams p;
    p.trees = 1;
    p.depth = 1;
    p.learning_rate = 0.1;
    p.min_leaf = 1;
    const Vector pred = fit_boosted(x, y, p, 0).predict(x);
    CHECK(pred[0] == doctest::Approx(1.0 - 0.1));
    CHECK(pred[3] == doctest::Approx(1.0 + 0.1));
  }

  TEST_CASE("training loss never increases and fits a nonlinear target") {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> z;
    const Index n = 500;
    Matrix x(n, 3);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < 3; ++j) x(i, j) = z(gen);
      y[i] = std::sin(2 * x(i, 0)) + (x(i, 1) > 0 ? 1.0 : -1.0) + 0.1 * z(gen);
    }
    GbtParams p;
    p.trees = 150;
    const auto m = fit_boosted(x, y, p, 1);
    REQUIRE(m.train_loss.size() == p.trees + 1);
    for (std::size_t t = 1; t < m.train_loss.size(); ++t) CHECK(m.train_loss[t] <= m.train_loss[t - 1] + 1e-12);
    CHECK(m.train_loss.back() < 0.2 * m.train_loss.front());
  }

  TEST_CASE("min_leaf is respected") {
    Matrix x(10, 1);
    Vector y(10);
    for (Index i = 0; i < 10; ++i) {
      x(i, 0) = static_cast<double>(i);
      y[i] = i == 0 ? 100.0 : 0.0;
    }
    GbtParams p;
    p.trees = 1;
    p.depth = 1;
    p.learning_rate = 1.0;
    p.min_leaf = 4;
    const auto m = fit_boosted(x, y, p, 0);
    const auto& root = m.trees[0].nodes[0];
    REQUIRE(root.feature == 0);
    CHECK(root.threshold > 3.0);
  }

  TEST_CASE("fits are deterministic under subsampling") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> z;
    Matrix x(200, 2);
    Vector y(200);
    for (Index i = 0; i < 200; ++i) {
      x(i, 0) = z(gen);
      x(i, 1) = z(gen);
      y[i] = x(i, 0) * x(i, 1);
    }
    GbtParams p;
    p.subsample = 0.5;
    p.trees = 30;
    const Vector a = fit_boosted(x, y, p, 9).predict(x);
    const Vector b = fit_boosted(x, y, p, 9).predict(x);
    const Vector c = fit_boosted(x, y, p, 10).predict(x);
    CHECK(a == b);
    CHECK(a != c);
  }

  TEST_CASE("parameter checks") {
    GbtParams p;
    SUBCASE("trees") { p.trees = 0; }
    SUBCASE("depth") { p.depth = 0; }
    SUBCASE("rate") { p.learning_rate = 0.0; }
    SUBCASE("subsample") { p.subsample = 1.5; }
    SUBCASE("min leaf") { p.min_leaf = 0; }
    CHECK_THROWS_AS(check_params(p), ValidationError);
  }
}
