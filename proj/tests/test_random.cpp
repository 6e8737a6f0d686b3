#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"

#include "fedpoison/random.hpp"

using fedpoison::Random;

TEST_CASE("same seed, same stream") {
  Random a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
  }
  CHECK(Random(42).next_u64() != c.next_u64());
}

TEST_CASE("engine output is the standard mt19937_64 sequence") {
  // The 10000th output for the default seed is fixed by the C++ standard.
  Random r(5489u);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = r.next_u64();
  CHECK(x == 9981545732273789042ULL);
}

TEST_CASE("uniform stays in [0,1) with mean near 1/2") {
  Random r(1);
  double sum = 0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("uniform_index covers its range evenly") {
  Random r(2);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) counts[r.uniform_index(7)]++;
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);
  CHECK(r.uniform_index(1) == 0);
}

TEST_CASE("normal has zero mean and unit variance") {
  Random r(3);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  const double mean = s / n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(s2 / n - mean * mean == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("gamma matches its mean and variance for small and large shape") {
  for (double shape : {0.3, 0.5, 1.0, 2.5, 9.0}) {
    CAPTURE(shape);
    Random r(4);
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double g = r.gamma(shape);
      REQUIRE(g >= 0.0);
      s += g;
      s2 += g * g;
    }
    const double mean = s / n;
    CHECK(mean == doctest::Approx(shape).epsilon(0.03));
    CHECK(s2 / n - mean * mean == doctest::Approx(shape).epsilon(0.06));
  }
}

TEST_CASE("dirichlet draws lie on the simplex") {
  Random r(5);
  for (double alpha : {0.01, 0.5, 1.0, 1e6}) {
    const auto p = r.dirichlet(alpha, 5);
    REQUIRE(p.size() == 5);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (double x : p) CHECK(x >= 0.0);
  }
  // Symmetric mean is 1/k.
  std::vector<double> mean(4, 0.0);
  for (int i = 0; i < 20000; ++i) {
    const auto p = r.dirichlet(0.5, 4);
    for (int j = 0; j < 4; ++j) mean[j] += p[j] / 20000;
  }
  for (double m : mean) CHECK(m == doctest::Approx(0.25).epsilon(0.04));
}

TEST_CASE("shuffle is a permutation and every position is reachable") {
  Random r(6);
  std::vector<int> v(10);
  std::iota(v.begin(), v.end(), 0);
  std::vector<std::set<int>> seen(10);
  for (int t = 0; t < 500; ++t) {
    auto w = v;
    r.shuffle(w);
    auto sorted = w;
    std::sort(sorted.begin(), sorted.end());
    REQUIRE(sorted == v);
    for (int i = 0; i < 10; ++i) seen[i].insert(w[i]);
  }
  for (const auto& s : seen) CHECK(s.size() == 10);
}

TEST_CASE("sample_without_replacement returns distinct in-range positions") {
  Random r(7);
  const auto s = r.sample_without_replacement(50, 20);
  CHECK(s.size() == 20);
  CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 20);
  for (auto i : s) CHECK(i < 50);
  CHECK(r.sample_without_replacement(5, 5).size() == 5);
  CHECK(r.sample_without_replacement(5, 0).empty());
}
