#include "fedpoison/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "fedpoison/bytes.hpp"
#include "fedpoison/errors.hpp"
#include "fedpoison/random.hpp"

namespace fedpoison {

Standardizer Standardizer::fit(const Matrix& features) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  if (n == 0) return s;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += features(i, j);
  }
  for (double& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = features(i, j) - s.mean[j];
      var[j] += diff * diff;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Dataset Standardizer::apply(const Dataset& data) const {
  if (data.num_features() != mean.size()) {
    throw DataError("standardizer: feature count mismatch");
  }
  Matrix x = data.features();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) = (x(i, j) - mean[j]) / scale[j];
  }
  return Dataset(std::move(x), data.labels(), data.num_classes(), data.feature_names());
}

EncodedTable encode(const csv::Table& table, const PreprocessOptions& options) {
  const auto& header = table.header;
  const auto label_it = std::find(header.begin(), header.end(), options.label_column);
  if (label_it == header.end()) {
    throw DataError("label column '" + options.label_column + "' not found");
  }
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());
  const std::unordered_set<std::string> explicit_drops(options.drop_columns.begin(),
                                                       options.drop_columns.end());

  // Column typing over all rows: numeric when every non-empty cell parses.
  std::vector<bool> numeric(header.size(), true);
  double scratch = 0.0;
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (numeric[j] && csv::classify(row[j], scratch) == csv::CellKind::text) numeric[j] = false;
    }
  }

  EncodedTable out;
  std::vector<std::size_t> candidate_cols;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j == label_col) continue;
    if (explicit_drops.contains(header[j])) {
      out.dropped_columns.push_back(header[j]);
      continue;
    }
    candidate_cols.push_back(j);
  }

  // Row filtering: any missing or non-finite cell among kept columns or the label.
  std::vector<std::size_t> kept_rows;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    bool usable = csv::classify(row[label_col], scratch) != csv::CellKind::empty &&
                  csv::classify(row[label_col], scratch) != csv::CellKind::non_finite;
    for (std::size_t j : candidate_cols) {
      if (!usable) break;
      const auto kind = csv::classify(row[j], scratch);
      usable = kind == csv::CellKind::finite || kind == csv::CellKind::text;
    }
    if (usable) kept_rows.push_back(i);
  }
  out.dropped_rows = table.rows.size() - kept_rows.size();
  if (kept_rows.empty()) throw DataError("no usable rows after removing Inf/NaN/missing values");

  // Text columns: encode by first appearance unless identifier-like.
  std::vector<std::size_t> feature_cols;
  std::vector<std::unordered_map<std::string, double>> codes(header.size());
  for (std::size_t j : candidate_cols) {
    if (!numeric[j]) {
      auto& map = codes[j];
      for (std::size_t i : kept_rows) {
        const auto& cell = table.rows[i][j];
        if (!map.contains(cell)) map.emplace(cell, static_cast<double>(map.size()));
      }
      if (map.size() > options.max_categories) {
        spdlog::debug("dropping identifier-like column '{}' ({} distinct values)", header[j],
                      map.size());
        out.dropped_columns.push_back(header[j]);
        continue;
      }
    }
    feature_cols.push_back(j);
  }
  if (feature_cols.empty()) throw DataError("no feature columns left after preprocessing");

  Matrix x(kept_rows.size(), feature_cols.size());
  std::vector<Label> y(kept_rows.size());
  std::unordered_map<std::string, Label> label_ids;
  for (std::size_t r = 0; r < kept_rows.size(); ++r) {
    const auto& row = table.rows[kept_rows[r]];
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      const std::size_t j = feature_cols[f];
      if (numeric[j]) {
        csv::classify(row[j], x(r, f));
      } else {
        x(r, f) = codes[j].at(row[j]);
      }
    }
    const auto& name = row[label_col];
    auto [it, inserted] = label_ids.emplace(name, static_cast<Label>(out.class_names.size()));
    if (inserted) out.class_names.push_back(name);
    y[r] = it->second;
  }

  std::vector<std::string> names;
  names.reserve(feature_cols.size());
  for (std::size_t j : feature_cols) names.push_back(header[j]);
  out.data = Dataset(std::move(x), std::move(y), static_cast<std::uint32_t>(out.class_names.size()),
                     std::move(names));
  return out;
}

Preprocessed preprocess(const csv::Table& table, const PreprocessOptions& options) {
  EncodedTable encoded = encode(table, options);
  Preprocessed out;
  out.standardizer = Standardizer::fit(encoded.data.features());
  out.data = out.standardizer.apply(encoded.data);
  out.class_names = std::move(encoded.class_names);
  out.dropped_columns = std::move(encoded.dropped_columns);
  out.dropped_rows = encoded.dropped_rows;
  return out;
}

namespace {

std::vector<std::vector<std::size_t>> rows_by_class(const Dataset& data) {
  std::vector<std::vector<std::size_t>> rows(data.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i) rows[data.labels()[i]].push_back(i);
  return rows;
}

}  // namespace

SplitResult split(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split: train fraction must lie in (0, 1)");
  }
  if (dataset.size() < 2) throw std::invalid_argument("split: need at least two rows");
  Random rng(seed);
  SplitResult out;
  for (auto& rows : rows_by_class(dataset)) {
    if (rows.empty()) continue;
    rng.shuffle(rows);
    std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
    if (rows.size() == 1) {
      spdlog::warn("split: class with a single sample assigned to the training side");
      n_train = 1;
    }
    out.train_rows.insert(out.train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test_rows.insert(out.test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  out.train = dataset.subset(out.train_rows);
  out.test = dataset.subset(out.test_rows);
  return out;
}

PartitionPlan partition(const Dataset& train, std::size_t n_clients, PartitionMethod method,
                        std::uint64_t seed) {
  if (n_clients == 0) throw std::invalid_argument("partition: need at least one client");
  if (n_clients > train.size()) {
    throw std::invalid_argument("partition: " + std::to_string(n_clients) + " clients but only " +
                                std::to_string(train.size()) + " rows");
  }
  PartitionPlan plan;
  plan.method = method;
  plan.seed = seed;
  plan.client_shards.resize(n_clients);
  Random rng(seed);

  if (method.kind == PartitionMethod::Kind::iid) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); ++i) plan.client_shards[i % n_clients].push_back(order[i]);
  } else {
    if (!(method.alpha > 0.0) || !std::isfinite(method.alpha)) {
      throw std::invalid_argument("partition: dirichlet alpha must be positive");
    }
    for (auto& rows : rows_by_class(train)) {
      rng.shuffle(rows);
      auto proportions = rng.dirichlet(method.alpha, n_clients);
      const double n = static_cast<double>(rows.size());
      double cumulative = 0.0;
      std::size_t begin = 0;
      for (std::size_t client = 0; client < n_clients; ++client) {
        std::size_t end = rows.size();
        if (client + 1 < n_clients) {
          cumulative += proportions[client];
          end = std::min(rows.size(), static_cast<std::size_t>(std::floor(cumulative * n)));
          end = std::max(end, begin);
        }
        auto& shard = plan.client_shards[client];
        shard.insert(shard.end(), rows.begin() + static_cast<std::ptrdiff_t>(begin),
                     rows.begin() + static_cast<std::ptrdiff_t>(end));
        begin = end;
      }
      plan.class_proportions.push_back(std::move(proportions));
    }
    for (auto& shard : plan.client_shards) {
      if (!shard.empty()) continue;
      auto largest = std::max_element(
          plan.client_shards.begin(), plan.client_shards.end(),
          [](const auto& a, const auto& b) { return a.size() < b.size(); });
      shard.push_back(largest->back());
      largest->pop_back();
    }
  }
  for (auto& shard : plan.client_shards) std::sort(shard.begin(), shard.end());
  return plan;
}

Dataset make_synthetic(std::size_t n, std::size_t d, std::uint32_t c, double separation,
                       std::uint64_t seed) {
  if (c == 0 || n < c) throw std::invalid_argument("make_synthetic: need n >= c >= 1");
  if (d < 2) throw std::invalid_argument("make_synthetic: need d >= 2");
  if (d + 1 < c) {
    throw std::invalid_argument("make_synthetic: " + std::to_string(c) +
                                " equidistant means need at least " + std::to_string(c - 1) +
                                " dimensions");
  }
  if (!(separation > 0.0)) throw std::invalid_argument("make_synthetic: separation must be > 0");

  // Centred simplex vertices e_k - 1/c expressed in the Helmert basis of the
  // sum-zero subspace; edge length sqrt(2) before scaling.
  const double edge_scale = separation / std::sqrt(2.0);
  Matrix means(c, d, 0.0);
  for (std::uint32_t k = 0; k < c; ++k) {
    for (std::size_t j = 1; j < c; ++j) {
      const double norm = std::sqrt(static_cast<double>(j * (j + 1)));
      double coord = 0.0;
      if (k < j) coord = 1.0 / norm;
      else if (k == j) coord = -static_cast<double>(j) / norm;
      means(k, j - 1) = coord * edge_scale;
    }
  }

  Random rng(seed);
  Matrix x(n, d);
  std::vector<Label> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<Label>(i % c);
    y[i] = label;
    for (std::size_t j = 0; j < d; ++j) x(i, j) = means(label, j) + rng.normal();
  }
  std::vector<std::string> names(d);
  for (std::size_t j = 0; j < d; ++j) names[j] = "f" + std::to_string(j);
  return Dataset(std::move(x), std::move(y), c, std::move(names));
}

namespace {
constexpr char kCacheMagic[4] = {'F', 'P', 'D', 'S'};
constexpr std::uint32_t kCacheVersion = 1;
}  // namespace

void write_cache(const std::filesystem::path& path, const Dataset& data) {
  ByteWriter w;
  w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(kCacheMagic), 4));
  w.put_u32(kCacheVersion);
  w.put_u64(data.size());
  w.put_u64(data.num_features());
  w.put_u32(data.num_classes());
  for (double v : data.features().values()) w.put_f64(v);
  for (Label y : data.labels()) w.put_u32(y);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write dataset cache: " + path.string());
  out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.size()));
  if (!out) throw DataError("failed writing dataset cache: " + path.string());
}

Dataset read_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset cache: " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    ByteReader r(bytes);
    const auto magic = r.get_bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kCacheMagic)) throw DataError("dataset cache: bad magic");
    if (r.get_u32() != kCacheVersion) throw DataError("dataset cache: unsupported version");
    const auto n = r.get_u64();
    const auto d = r.get_u64();
    const auto c = r.get_u32();
    if (d != 0 && n > r.remaining() / (8 * d)) throw DataError("dataset cache: truncated");
    std::vector<double> values(n * d);
    for (double& v : values) v = r.get_f64();
    std::vector<Label> labels(n);
    for (Label& y : labels) y = r.get_u32();
    if (r.remaining() != 0) throw DataError("dataset cache: trailing bytes");
    std::vector<std::string> names(d);
    for (std::size_t j = 0; j < d; ++j) names[j] = "f" + std::to_string(j);
    return Dataset(Matrix(n, d, std::move(values)), std::move(labels), c, std::move(names));
  } catch (const ShortBuffer&) {
    throw DataError("dataset cache: truncated");
  }
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write csv: " + path.string());
  for (std::size_t j = 0; j < data.num_features(); ++j) {
    out << (data.feature_names().empty() ? "f" + std::to_string(j) : data.feature_names()[j]) << ',';
  }
  out << "Label\n";
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.features().row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    out << data.labels()[i] << '\n';
  }
}

}  // namespace fedpoison
