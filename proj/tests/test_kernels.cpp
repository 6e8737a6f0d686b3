#include <cmath>
#include <vector>

#include "doctest.h"

#include "fedpoison/kernels.hpp"
#include "fedpoison/random.hpp"

using namespace fedpoison;
using namespace fedpoison::kernels;

namespace {

std::vector<double> random_vector(Random& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// Bound for a reordered sum: a few ulps of the sum of |terms| per lane split.
double reduction_tolerance(std::size_t n, double abs_sum) {
  return 4.0 * static_cast<double>(n + 8) * std::numeric_limits<double>::epsilon() * abs_sum;
}

}  // namespace

TEST_CASE("scalar table is always available and listed first") {
  const auto isas = available_isas();
  REQUIRE_FALSE(isas.empty());
  CHECK(isas.front() == Isa::scalar);
  CHECK(table_for(Isa::scalar) == &scalar_table());
  CHECK(isa_name(Isa::scalar) == "scalar");
}

TEST_CASE("selecting an instruction set switches the active table") {
  const Isa before = active().isa;
  for (Isa isa : available_isas()) {
    REQUIRE(select(isa));
    CHECK(active().isa == isa);
  }
  select(before);
}

TEST_CASE("scalar reference kernels on hand-checked inputs") {
  const auto& k = scalar_table();
  const double a[] = {1, 2, 3};
  const double b[] = {4, -5, 6};
  CHECK(k.dot(a, b, 3) == 12.0);
  CHECK(k.squared_distance(a, b, 3) == 9.0 + 49.0 + 9.0);
  double y[] = {1, 1, 1};
  k.axpy(2.0, a, y, 3);
  CHECK(y[0] == 3.0);
  CHECK(y[2] == 7.0);
  CHECK(k.dot(a, b, 0) == 0.0);
}

TEST_CASE("every SIMD table matches the scalar reference") {
  const auto& ref = scalar_table();
  Random rng(11);
  for (Isa isa : available_isas()) {
    const KernelTable* k = table_for(isa);
    REQUIRE(k != nullptr);
    CAPTURE(isa_name(isa));
    // Lengths straddle every vector width and remainder.
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 101u, 4411u}) {
      CAPTURE(n);
      const auto a = random_vector(rng, n, 3.0);
      const auto b = random_vector(rng, n, 3.0);

      double abs_dot = 0.0, abs_dist = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        abs_dot += std::abs(a[i] * b[i]);
        abs_dist += (a[i] - b[i]) * (a[i] - b[i]);
      }
      CHECK(std::abs(k->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <=
            reduction_tolerance(n, abs_dot));
      CHECK(std::abs(k->squared_distance(a.data(), b.data(), n) - ref.squared_distance(a.data(), b.data(), n)) <=
            reduction_tolerance(n, abs_dist));

      auto y1 = b, y2 = b;
      ref.axpy(-0.37, a.data(), y1.data(), n);
      k->axpy(-0.37, a.data(), y2.data(), n);
      CHECK(y1 == y2);

      auto p1 = a, p2 = a;
      const auto g = random_vector(rng, n);
      std::vector<double> m1(n, 0.01), v1(n, 0.02), m2 = m1, v2 = v1;
      const AdamCoefficients c{1e-3, 0.9, 0.999, 0.1, 0.001, 1 - 0.9 * 0.9, 1 - 0.999 * 0.999, 1e-8};
      ref.adam_update(p1.data(), g.data(), m1.data(), v1.data(), n, c);
      k->adam_update(p2.data(), g.data(), m2.data(), v2.data(), n, c);
      CHECK(p1 == p2);
      CHECK(m1 == m2);
      CHECK(v1 == v2);
    }
  }
}
