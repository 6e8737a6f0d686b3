#pragma once

// Server-side aggregation rules over flat parameter vectors. Every rule
// orders its inputs by ascending client id first, so the result does not
// depend on the order updates arrived in.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedpoison/random.hpp"

namespace fedpoison {

struct ClientUpdate {
  std::uint32_t client_id = 0;
  std::vector<double> params;
  std::uint64_t n_samples = 1;
};

struct AggregatorKind {
  enum class Rule { fedavg, median, trimmed_mean, krum };
  Rule rule = Rule::fedavg;
  std::size_t trim_k = 1;   // trimmed_mean
  std::size_t krum_f = 1;   // krum

  static AggregatorKind fedavg() { return {}; }
  static AggregatorKind median() { return {Rule::median, 0, 0}; }
  static AggregatorKind trimmed_mean(std::size_t k) { return {Rule::trimmed_mean, k, 0}; }
  static AggregatorKind krum(std::size_t f) { return {Rule::krum, 0, f}; }
};

std::string to_string(AggregatorKind::Rule rule);
AggregatorKind::Rule parse_rule(const std::string& name);

/// Sample-count weighted mean, computed as first + sum w_i (u_i - first) so
/// identical inputs come back unchanged.
std::vector<double> fedavg(const std::vector<ClientUpdate>& updates);

/// Coordinate-wise median; an even count averages the two middle values.
std::vector<double> coordinate_median(const std::vector<ClientUpdate>& updates);

/// Coordinate-wise mean after discarding the k smallest and k largest values.
std::vector<double> trimmed_mean(const std::vector<ClientUpdate>& updates, std::size_t k);

struct KrumResult {
  std::vector<double> chosen;
  std::uint32_t chosen_client = 0;
  /// Score per update in ascending client-id order.
  std::vector<double> scores;
};

/// Picks the update whose n-f-2 nearest neighbours (squared Euclidean) are
/// closest in total. Ties go to the lowest client id. Requires n >= f + 3.
KrumResult krum(const std::vector<ClientUpdate>& updates, std::size_t f);

std::vector<double> aggregate(const std::vector<ClientUpdate>& updates, const AggregatorKind& kind);

/// Scales the update to L2 norm at most clip_norm, then adds N(0, (sigma*clip_norm)^2)
/// to every coordinate.
std::vector<double> dp_noise(const std::vector<double>& update, double clip_norm, double sigma, Random& rng);

}  // namespace fedpoison
