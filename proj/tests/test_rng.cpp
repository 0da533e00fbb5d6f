#include "dmldeep/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace dmldeep;

TEST_SUITE("rng") {
  TEST_CASE("same seed gives the same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    Rng c(42), d(42);
    for (int i = 0; i < 100; ++i) CHECK(c.normal() == d.normal());
  }

  TEST_CASE("derived seeds differ by tag and index") {
    std::set<std::uint64_t> seen;
    for (const char* tag : {"eps", "nu", "features/tab", "features/txt"})
      for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(7, tag, i));
    CHECK(seen.size() == 200);
    CHECK(derive_seed(7, "eps") != derive_seed(8, "eps"));
    CHECK(derive_seed(7, "eps", 3) == derive_seed(7, "eps", 3));
  }

  TEST_CASE("fnv1a64 reference values") {
    // Published FNV-1a 64-bit test vectors.
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  }

  TEST_CASE("uniform stays in [0,1) with the right mean") {
    Rng r(3);
    double sum = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = r.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
  }

  TEST_CASE("normal draws have unit moments") {
    Rng r(5);
    const int n = 200000;
    double s1 = 0, s2 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
      const double z = r.normal();
      s1 += z;
      s2 += z * z;
      s4 += z * z * z * z;
    }
    CHECK(std::abs(s1 / n) < 0.015);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
    CHECK(std::abs(s4 / n - 3.0) < 0.1);
  }

  TEST_CASE("below is unbiased over a small range") {
    Rng r(9);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
      const auto k = r.below(7);
      REQUIRE(k < 7);
      ++counts[k];
    }
    // Chi-square with 6 df; 22.5 is the 0.999 quantile.
    double chi = 0;
    for (int c : counts) chi += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
    CHECK(chi < 22.5);
  }

  TEST_CASE("permutation is a permutation") {
    Rng r(11);
    auto p = r.permutation(1000);
    std::vector<std::size_t> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> iota(1000);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(sorted == iota);
    CHECK(p != iota);
    CHECK(r.permutation(0).empty());
  }
}
