#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "doctest.h"
#include "support.hpp"

#include "fedpoison/aggregation.hpp"

using namespace fedpoison;
using Big = boost::multiprecision::cpp_dec_float_50;

namespace {

std::vector<ClientUpdate> random_updates(Random& rng, std::size_t n, std::size_t dim, bool weighted) {
  std::vector<ClientUpdate> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    ClientUpdate u{i, std::vector<double>(dim), weighted ? 1 + rng.uniform_index(500) : 1};
    for (double& x : u.params) x = rng.normal() * std::pow(10.0, static_cast<double>(rng.uniform_index(4)));
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<ClientUpdate> scalars(std::initializer_list<double> values) {
  std::vector<ClientUpdate> out;
  std::uint32_t id = 0;
  for (double v : values) out.push_back({id++, {v}, 1});
  return out;
}

std::vector<double> oracle_fedavg(const std::vector<ClientUpdate>& us) {
  std::vector<double> out(us[0].params.size());
  Big total = 0;
  for (const auto& u : us) total += Big(u.n_samples);
  for (std::size_t j = 0; j < out.size(); ++j) {
    Big acc = 0;
    for (const auto& u : us) acc += Big(u.params[j]) * Big(u.n_samples);
    out[j] = (acc / total).convert_to<double>();
  }
  return out;
}

std::vector<double> oracle_trimmed(const std::vector<ClientUpdate>& us, std::size_t k) {
  std::vector<double> out(us[0].params.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    std::vector<double> col;
    for (const auto& u : us) col.push_back(u.params[j]);
    std::sort(col.begin(), col.end());
    Big acc = 0;
    for (std::size_t i = k; i < col.size() - k; ++i) acc += Big(col[i]);
    out[j] = (acc / Big(col.size() - 2 * k)).convert_to<double>();
  }
  return out;
}

std::vector<double> oracle_median(const std::vector<ClientUpdate>& us) {
  std::vector<double> out(us[0].params.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    std::vector<double> col;
    for (const auto& u : us) col.push_back(u.params[j]);
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    out[j] = n % 2 ? col[n / 2] : ((Big(col[n / 2 - 1]) + Big(col[n / 2])) / 2).convert_to<double>();
  }
  return out;
}

// Exhaustive Krum: every pairwise distance in high precision.
std::size_t oracle_krum(const std::vector<ClientUpdate>& us, std::size_t f) {
  const std::size_t n = us.size();
  std::vector<Big> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Big> d;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      Big s = 0;
      for (std::size_t k = 0; k < us[i].params.size(); ++k) {
        const Big diff = Big(us[i].params[k]) - Big(us[j].params[k]);
        s += diff * diff;
      }
      d.push_back(s);
    }
    std::sort(d.begin(), d.end());
    for (std::size_t m = 0; m < n - f - 2; ++m) scores[i] += d[m];
  }
  return static_cast<std::size_t>(std::min_element(scores.begin(), scores.end()) - scores.begin());
}

void check_close(const std::vector<double>& got, const std::vector<double>& want, double rel) {
  REQUIRE(got.size() == want.size());
  for (std::size_t j = 0; j < got.size(); ++j) {
    CHECK(std::abs(got[j] - want[j]) <= rel * std::max(1.0, std::abs(want[j])));
  }
}

}  // namespace

TEST_CASE("fedavg examples") {
  std::vector<ClientUpdate> same;
  const std::vector<double> u{0.1, -3.7, 1e-9, 42.0};
  for (std::uint32_t i = 0; i < 5; ++i) same.push_back({i, u, 1 + i * 7});
  CHECK(fedavg(same) == u);

  std::vector<ClientUpdate> w{{0, {0.0}, 1}, {1, {1.0}, 3}};
  CHECK(fedavg(w)[0] == 0.75);
}

TEST_CASE("aggregators match high-precision oracles on random sets") {
  Random rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.uniform_index(6);
    const auto us = random_updates(rng, n, 1 + rng.uniform_index(100), true);
    check_close(fedavg(us), oracle_fedavg(us), 1e-12);
    check_close(coordinate_median(us), oracle_median(us), 1e-15);
    const std::size_t k = rng.uniform_index((n - 1) / 2 + 1);
    check_close(trimmed_mean(us, k), oracle_trimmed(us, k), 1e-12);
    const std::size_t f = rng.uniform_index(n - 2);
    const KrumResult kr = krum(us, f);
    CHECK(kr.chosen_client == oracle_krum(us, f));
    CHECK(kr.chosen == us[kr.chosen_client].params);
  }
}

TEST_CASE("aggregators ignore arrival order") {
  Random rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto us = random_updates(rng, 6, 30, true);
    const auto avg = fedavg(us), med = coordinate_median(us), tm = trimmed_mean(us, 2);
    const auto kr = krum(us, 1);
    auto shuffled = us;
    rng.shuffle(shuffled);
    check_close(fedavg(shuffled), avg, 1e-12);
    CHECK(coordinate_median(shuffled) == med);
    CHECK(trimmed_mean(shuffled, 2) == tm);
    CHECK(krum(shuffled, 1).chosen == kr.chosen);
    CHECK(krum(shuffled, 1).scores == kr.scores);
  }
}

TEST_CASE("coordinate-wise rules act per slice") {
  Random rng(6);
  const auto us = random_updates(rng, 5, 20, true);
  std::vector<ClientUpdate> head, tail;
  for (const auto& u : us) {
    head.push_back({u.client_id, {u.params.begin(), u.params.begin() + 8}, u.n_samples});
    tail.push_back({u.client_id, {u.params.begin() + 8, u.params.end()}, u.n_samples});
  }
  auto joined = [](std::vector<double> a, const std::vector<double>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  CHECK(fedavg(us) == joined(fedavg(head), fedavg(tail)));
  CHECK(coordinate_median(us) == joined(coordinate_median(head), coordinate_median(tail)));
  CHECK(trimmed_mean(us, 1) == joined(trimmed_mean(head, 1), trimmed_mean(tail, 1)));
}

TEST_CASE("translation equivariance") {
  Random rng(7);
  const auto us = random_updates(rng, 7, 15, true);
  std::vector<double> shift(15);
  for (double& s : shift) s = rng.normal() * 3;
  auto moved = us;
  for (auto& u : moved) {
    for (std::size_t j = 0; j < 15; ++j) u.params[j] += shift[j];
  }
  auto plus_shift = [&](std::vector<double> v) {
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += shift[j];
    return v;
  };
  check_close(fedavg(moved), plus_shift(fedavg(us)), 1e-12);
  check_close(coordinate_median(moved), plus_shift(coordinate_median(us)), 1e-12);
  check_close(trimmed_mean(moved, 2), plus_shift(trimmed_mean(us, 2)), 1e-12);
  CHECK(krum(moved, 2).chosen_client == krum(us, 2).chosen_client);
}

TEST_CASE("median examples") {
  CHECK(coordinate_median(scalars({1, 2, 100}))[0] == 2.0);
  CHECK(coordinate_median(scalars({1, 3}))[0] == 2.0);

  Random rng(8);
  std::vector<ClientUpdate> honest;
  for (std::uint32_t i = 0; i < 5; ++i) {
    honest.push_back({i, std::vector<double>(10), 1});
    for (double& x : honest.back().params) x = 1.0 + 0.01 * rng.normal();
  }
  auto attacked = honest;
  for (double& x : attacked[3].params) x = 1e6;
  const auto a = coordinate_median(honest), b = coordinate_median(attacked);
  for (std::size_t j = 0; j < 10; ++j) {
    double lo = 1e300, hi = -1e300;
    for (const auto& u : honest) {
      lo = std::min(lo, u.params[j]);
      hi = std::max(hi, u.params[j]);
    }
    CHECK(std::abs(a[j] - b[j]) < hi - lo);
    CHECK(b[j] >= lo);
    CHECK(b[j] <= hi);
  }
}

TEST_CASE("trimmed mean examples") {
  Random rng(9);
  const auto us = random_updates(rng, 5, 12, false);
  std::vector<double> mean(12, 0.0);
  for (const auto& u : us) {
    for (std::size_t j = 0; j < 12; ++j) mean[j] += u.params[j];
  }
  for (double& m : mean) m /= 5;
  check_close(trimmed_mean(us, 0), mean, 1e-12);
  CHECK(trimmed_mean(scalars({0, 0, 0, 0, 1e9}), 1)[0] == 0.0);
  CHECK_THROWS_AS(trimmed_mean(scalars({1, 2, 3, 4}), 2), std::invalid_argument);
}

TEST_CASE("krum examples") {
  std::vector<ClientUpdate> us;
  for (std::uint32_t i = 0; i < 4; ++i) us.push_back({i, {1.0, 2.0, 3.0}, 1});
  us.push_back({4, {100.0, -50.0, 7.0}, 1});
  const KrumResult r = krum(us, 1);
  CHECK(r.chosen == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(r.chosen_client == oracle_krum(us, 1));
  CHECK(r.scores[4] > 0.0);

  std::vector<ClientUpdate> same;
  for (std::uint32_t i : {7u, 3u, 5u, 9u}) same.push_back({i, {0.5, 0.5}, 1});
  const KrumResult tie = krum(same, 1);
  CHECK(tie.chosen_client == 3);
  for (double s : tie.scores) CHECK(s == 0.0);

  CHECK_THROWS_AS(krum(scalars({1, 2, 3}), 1), std::invalid_argument);
}

TEST_CASE("robust rules withstand a minority of outliers") {
  Random rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t f = 1 + rng.uniform_index(2);
    const std::size_t honest = 2 * f + 3;
    std::vector<ClientUpdate> us;
    std::vector<double> centre(8);
    for (double& c : centre) c = rng.normal();
    std::uint32_t id = 0;
    for (std::size_t i = 0; i < honest; ++i) {
      us.push_back({id++, centre, 1});
      for (double& x : us.back().params) x += 0.1 * rng.normal();
    }
    for (std::size_t i = 0; i < f; ++i) {
      us.push_back({id++, std::vector<double>(8), 1});
      for (double& x : us.back().params) x = 1e3 * rng.normal();
    }
    CHECK(krum(us, f).chosen_client < honest);
    const auto med = coordinate_median(us);
    for (std::size_t j = 0; j < 8; ++j) {
      double lo = 1e300, hi = -1e300;
      for (std::size_t i = 0; i < honest; ++i) {
        lo = std::min(lo, us[i].params[j]);
        hi = std::max(hi, us[i].params[j]);
      }
      CHECK(med[j] >= lo);
      CHECK(med[j] <= hi);
    }
  }
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(fedavg({}), std::invalid_argument);
  CHECK_THROWS_AS(fedavg({{0, {1, 2}, 1}, {1, {1}, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(fedavg({{0, {1}, 1}, {0, {2}, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(coordinate_median({{0, {std::nan("")}, 1}}), std::invalid_argument);
  CHECK(parse_rule("krum") == AggregatorKind::Rule::krum);
  CHECK(to_string(AggregatorKind::Rule::trimmed_mean) == "trimmed_mean");
  CHECK_THROWS_AS(parse_rule("mean"), std::invalid_argument);
}

TEST_CASE("aggregate dispatches on the rule") {
  const auto us = scalars({1, 2, 100, 3, 4});
  CHECK(aggregate(us, AggregatorKind::fedavg())[0] == 22.0);
  CHECK(aggregate(us, AggregatorKind::median())[0] == 3.0);
  CHECK(aggregate(us, AggregatorKind::trimmed_mean(1))[0] == 3.0);
  CHECK(aggregate(us, AggregatorKind::krum(1))[0] == 2.0);
}

TEST_CASE("single update passes through every rule") {
  const std::vector<ClientUpdate> one{{3, {1.5, -2.0}, 17}};
  CHECK(fedavg(one) == one[0].params);
  CHECK(coordinate_median(one) == one[0].params);
  CHECK(trimmed_mean(one, 0) == one[0].params);
}

TEST_CASE("dp_noise") {
  Random rng(11);
  SUBCASE("no-op inside the clip ball") {
    const std::vector<double> u{0.3, -0.4};
    CHECK(dp_noise(u, 1.0, 0.0, rng) == u);
  }
  SUBCASE("clipping halves an update of twice the norm") {
    const std::vector<double> u{3.0, 4.0};
    const auto out = dp_noise(u, 2.5, 0.0, rng);
    CHECK(out[0] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("noise standard deviation is sigma * C") {
    const std::vector<double> zero(100000, 0.0);
    for (auto [c, sigma] : {std::pair{1.0, 1.0}, std::pair{0.5, 2.0}}) {
      const auto out = dp_noise(zero, c, sigma, rng);
      double s = 0, s2 = 0;
      for (double x : out) {
        s += x;
        s2 += x * x;
      }
      const double mean = s / 1e5;
      CHECK(std::sqrt(s2 / 1e5 - mean * mean) == doctest::Approx(sigma * c).epsilon(0.02));
    }
  }
  CHECK_THROWS_AS(dp_noise({1.0}, 0.0, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(dp_noise({1.0}, 1.0, -1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(dp_noise({INFINITY}, 1.0, 1.0, rng), std::invalid_argument);
}
