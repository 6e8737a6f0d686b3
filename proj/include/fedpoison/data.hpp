#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedpoison/csv.hpp"
#include "fedpoison/dataset.hpp"

namespace fedpoison {

struct PreprocessOptions {
  std::string label_column = "Label";
  /// Columns removed before anything else (e.g. flow identifiers).
  std::vector<std::string> drop_columns;
  /// Text columns with more distinct values than this are treated as
  /// identifiers and dropped instead of encoded.
  std::size_t max_categories = 64;
};

/// Per-feature z-score statistics. A zero deviation is treated as 1, so a
/// constant column maps to all zeros.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& features);
  Dataset apply(const Dataset& data) const;
};

struct EncodedTable {
  Dataset data;  // not standardized
  std::vector<std::string> class_names;  // index = class id
  std::vector<std::string> dropped_columns;
  std::size_t dropped_rows = 0;
};

/// Drops rows holding Inf/NaN/empty cells, integer-encodes text columns by
/// first appearance, and maps labels to 0..c-1 by first appearance.
EncodedTable encode(const csv::Table& table, const PreprocessOptions& options);

struct Preprocessed {
  Dataset data;
  Standardizer standardizer;
  std::vector<std::string> class_names;
  std::vector<std::string> dropped_columns;
  std::size_t dropped_rows = 0;
};

/// encode() followed by standardization with this table's own statistics.
Preprocessed preprocess(const csv::Table& table, const PreprocessOptions& options);

struct SplitResult {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_rows;  // positions in the input dataset
  std::vector<std::size_t> test_rows;
};

/// Stratified split: each class contributes round(train_fraction * n_class)
/// rows to train. Single-sample classes go to train.
SplitResult split(const Dataset& dataset, double train_fraction, std::uint64_t seed);

struct PartitionMethod {
  enum class Kind { iid, dirichlet };
  Kind kind = Kind::dirichlet;
  double alpha = 0.5;

  static PartitionMethod iid() { return {Kind::iid, 0.0}; }
  static PartitionMethod dirichlet(double alpha) { return {Kind::dirichlet, alpha}; }
};

struct PartitionPlan {
  /// Row positions (ascending) of each client's shard.
  std::vector<std::vector<std::size_t>> client_shards;
  PartitionMethod method;
  std::uint64_t seed = 0;
  /// Dirichlet draws, [class][client]; empty for iid.
  std::vector<std::vector<double>> class_proportions;
};

/// iid: shuffled round-robin. dirichlet: per class, proportions drawn from a
/// symmetric Dirichlet and the shuffled class rows cut at floor(cumsum * n).
/// Empty shards then take one row at a time from the largest shard.
PartitionPlan partition(const Dataset& train, std::size_t n_clients, PartitionMethod method,
                        std::uint64_t seed);

/// Gaussian blobs (unit covariance) centred on the vertices of a regular
/// simplex with edge length `separation`; labels cycle 0..c-1.
Dataset make_synthetic(std::size_t n, std::size_t d, std::uint32_t c, double separation,
                       std::uint64_t seed);

/// Binary dataset cache ("FPDS", version 1, little-endian).
void write_cache(const std::filesystem::path& path, const Dataset& data);
Dataset read_cache(const std::filesystem::path& path);

/// Writes features and a `Label` column (integer ids) as CSV.
void write_csv(const std::filesystem::path& path, const Dataset& data);

}  // namespace fedpoison
