#include "fedpoison/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedpoison/kernels.hpp"

namespace fedpoison {

std::string to_string(AggregatorKind::Rule rule) {
  switch (rule) {
    case AggregatorKind::Rule::fedavg:
      return "fedavg";
    case AggregatorKind::Rule::median:
      return "median";
    case AggregatorKind::Rule::trimmed_mean:
      return "trimmed_mean";
    case AggregatorKind::Rule::krum:
      return "krum";
  }
  return "unknown";
}

AggregatorKind::Rule parse_rule(const std::string& name) {
  for (auto rule : {AggregatorKind::Rule::fedavg, AggregatorKind::Rule::median,
                    AggregatorKind::Rule::trimmed_mean, AggregatorKind::Rule::krum}) {
    if (to_string(rule) == name) return rule;
  }
  throw std::invalid_argument("unknown aggregator '" + name + "'");
}

namespace {

// Updates sorted by client id, after validating the round's invariants.
std::vector<const ClientUpdate*> ordered(const std::vector<ClientUpdate>& updates) {
  if (updates.empty()) throw std::invalid_argument("aggregation: no updates");
  std::vector<const ClientUpdate*> out;
  out.reserve(updates.size());
  for (const auto& u : updates) out.push_back(&u);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->client_id < b->client_id; });
  const std::size_t len = out.front()->params.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i]->params.size() != len) throw std::invalid_argument("aggregation: update length mismatch");
    if (i > 0 && out[i]->client_id == out[i - 1]->client_id) {
      throw std::invalid_argument("aggregation: duplicate client id " + std::to_string(out[i]->client_id));
    }
    for (double x : out[i]->params) {
      if (!std::isfinite(x)) throw std::invalid_argument("aggregation: non-finite parameter");
    }
  }
  return out;
}

// Applies `reduce` to each coordinate's values (in client-id order).
template <typename Reduce>
std::vector<double> coordinate_wise(const std::vector<const ClientUpdate*>& sorted, Reduce reduce) {
  const std::size_t len = sorted.front()->params.size();
  std::vector<double> out(len);
  std::vector<double> column(sorted.size());
  for (std::size_t j = 0; j < len; ++j) {
    for (std::size_t i = 0; i < sorted.size(); ++i) column[i] = sorted[i]->params[j];
    out[j] = reduce(column);
  }
  return out;
}

}  // namespace

std::vector<double> fedavg(const std::vector<ClientUpdate>& updates) {
  const auto sorted = ordered(updates);
  double total = 0.0;
  for (const auto* u : sorted) {
    if (u->n_samples == 0) throw std::invalid_argument("fedavg: n_samples must be >= 1");
    total += static_cast<double>(u->n_samples);
  }
  const auto& base = sorted.front()->params;
  std::vector<double> result = base;
  std::vector<double> diff(base.size());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const auto& p = sorted[i]->params;
    for (std::size_t j = 0; j < p.size(); ++j) diff[j] = p[j] - base[j];
    kernels::axpy(static_cast<double>(sorted[i]->n_samples) / total, diff, result);
  }
  return result;
}

std::vector<double> coordinate_median(const std::vector<ClientUpdate>& updates) {
  return coordinate_wise(ordered(updates), [](std::vector<double>& column) {
    std::sort(column.begin(), column.end());
    const std::size_t n = column.size();
    if (n % 2 == 1) return column[n / 2];
    return std::midpoint(column[n / 2 - 1], column[n / 2]);
  });
}

std::vector<double> trimmed_mean(const std::vector<ClientUpdate>& updates, std::size_t k) {
  const auto sorted = ordered(updates);
  if (sorted.size() <= 2 * k) {
    throw std::invalid_argument("trimmed_mean: need more than 2k updates (k=" + std::to_string(k) + ")");
  }
  return coordinate_wise(sorted, [k](std::vector<double>& column) {
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (std::size_t i = k; i < column.size() - k; ++i) sum += column[i];
    return sum / static_cast<double>(column.size() - 2 * k);
  });
}

KrumResult krum(const std::vector<ClientUpdate>& updates, std::size_t f) {
  const auto sorted = ordered(updates);
  const std::size_t n = sorted.size();
  if (n < f + 3) {
    throw std::invalid_argument("krum: need n >= f + 3 (n=" + std::to_string(n) + ", f=" + std::to_string(f) + ")");
  }
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = kernels::squared_distance(sorted[i]->params, sorted[j]->params);
      dist[i * n + j] = d;
      dist[j * n + i] = d;
    }
  }
  const std::size_t neighbours = n - f - 2;
  KrumResult out;
  out.scores.resize(n);
  std::vector<double> row;
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back(dist[i * n + j]);
    }
    std::sort(row.begin(), row.end());
    out.scores[i] = std::accumulate(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(neighbours), 0.0);
    if (out.scores[i] < out.scores[best]) best = i;
  }
  out.chosen = sorted[best]->params;
  out.chosen_client = sorted[best]->client_id;
  return out;
}

std::vector<double> aggregate(const std::vector<ClientUpdate>& updates, const AggregatorKind& kind) {
  switch (kind.rule) {
    case AggregatorKind::Rule::fedavg:
      return fedavg(updates);
    case AggregatorKind::Rule::median:
      return coordinate_median(updates);
    case AggregatorKind::Rule::trimmed_mean:
      return trimmed_mean(updates, kind.trim_k);
    case AggregatorKind::Rule::krum:
      return krum(updates, kind.krum_f).chosen;
  }
  throw std::invalid_argument("aggregate: unknown rule");
}

std::vector<double> dp_noise(const std::vector<double>& update, double clip_norm, double sigma, Random& rng) {
  if (!(clip_norm > 0.0)) throw std::invalid_argument("dp_noise: clip norm must be > 0");
  if (!(sigma >= 0.0)) throw std::invalid_argument("dp_noise: sigma must be >= 0");
  for (double x : update) {
    if (!std::isfinite(x)) throw std::invalid_argument("dp_noise: non-finite input");
  }
  const double norm = std::sqrt(kernels::dot(update, update));
  const double scale = norm > clip_norm ? clip_norm / norm : 1.0;
  std::vector<double> out(update.size());
  const double stddev = sigma * clip_norm;
  for (std::size_t i = 0; i < update.size(); ++i) {
    out[i] = update[i] * scale;
    if (stddev > 0.0) out[i] += stddev * rng.normal();
  }
  return out;
}

}  // namespace fedpoison
