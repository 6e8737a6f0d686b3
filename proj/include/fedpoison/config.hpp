#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedpoison/aggregation.hpp"
#include "fedpoison/data.hpp"
#include "fedpoison/metrics.hpp"
#include "fedpoison/model.hpp"
#include "fedpoison/poisoning.hpp"

namespace fedpoison {

struct SyntheticParams {
  std::size_t n = 2200;
  std::size_t d = 20;
  std::uint32_t c = 11;
  double separation = 4.0;
};

struct DataSource {
  enum class Kind { csv, cache, synthetic };
  Kind kind = Kind::csv;
  std::string path;
  PreprocessOptions preprocess;
  SyntheticParams synthetic;
  double train_fraction = 0.7;
  double local_eval_fraction = 0.2;
};

struct DpSettings {
  bool enabled = false;
  double clip_norm = 1.0;
  double sigma = 0.0;
};

struct TransportSettings {
  double round_timeout_s = 120.0;
  bool ship_data = false;
};

/// Everything that determines one run. Defaults follow the reference
/// testbed: 5 clients, 20 rounds of 20 local epochs, patience 10, hidden
/// width 50, dropout 0.2, 70% label flips on the victim (client id 2).
struct ExperimentConfig {
  std::size_t n_clients = 5;
  std::size_t rounds = 20;
  std::uint64_t master_seed = 0;

  TrainSchedule training{20, 32, 10, 0.2};
  std::size_t hidden = 50;
  AdamHyper optimizer;
  AggregatorKind aggregator;

  AttackSpec attack;
  std::uint32_t victim_client = 2;

  PartitionMethod partition = PartitionMethod::dirichlet(0.5);
  DataSource data;
  DpSettings dp;
  F1Average f1_average = F1Average::macro;
  TransportSettings transport;
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Reads and validates a JSON config file. Relative data paths are resolved
/// against the config file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Invariant checks shared by the loaders; throws ConfigError.
void validate(const ExperimentConfig& config);

}  // namespace fedpoison
