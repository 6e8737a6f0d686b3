#pragma once

// Federated round loop shared by the in-process simulation and the wire
// server: ClientNode is one participant's local state, Coordinator is the
// server's (global model, aggregation, central evaluation).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedpoison/aggregation.hpp"
#include "fedpoison/config.hpp"
#include "fedpoison/data.hpp"
#include "fedpoison/model.hpp"
#include "fedpoison/poisoning.hpp"
#include "fedpoison/seeds.hpp"

namespace fedpoison {

/// Standardized train/test data plus the client partition.
struct PreparedData {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_rows;  // positions in the loaded dataset
  std::vector<std::size_t> test_rows;
  Standardizer standardizer;  // fitted on the training split
  PartitionPlan plan;
  std::size_t dropped_rows = 0;
};

/// Loads (csv / cache / synthetic), splits, standardizes with training
/// statistics, and partitions. Wraps failures in DataError.
PreparedData prepare_data(const ExperimentConfig& config, const SeedMap& seeds);

/// The dataset as loaded, before split or standardization.
Dataset load_dataset(const ExperimentConfig& config, const SeedMap& seeds);

struct ClientMetrics {
  std::uint32_t client_id = 0;
  double eval_loss = 0.0;
  double eval_accuracy = 0.0;
  double eval_f1 = 0.0;
  std::uint64_t n_samples = 0;
  std::uint32_t epochs_run = 0;
  bool operator==(const ClientMetrics&) const = default;
};

struct AggregateMetrics {
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  double test_f1 = 0.0;
  bool operator==(const AggregateMetrics&) const = default;
};

struct RoundRecord {
  std::uint32_t round = 0;  // 1-based
  std::vector<ClientMetrics> clients;  // ascending client id
  AggregateMetrics aggregated;
  bool operator==(const RoundRecord&) const = default;
};

/// One participant: its (possibly poisoned) shard split into local train and
/// eval parts, and an Adam state that persists across rounds.
class ClientNode {
 public:
  /// `shard_rows` are the shard's positions in the training split; they only
  /// label flip-log entries. The attack runs here when `victim` is set.
  ClientNode(std::uint32_t id, const Dataset& shard, std::vector<std::size_t> shard_rows,
             const ExperimentConfig& config, bool victim);

  struct RoundOutput {
    ClientUpdate update;
    ClientMetrics metrics;
  };

  /// Scores the received model on the local eval split, trains from it,
  /// optionally clips and noises the change, and returns the update.
  RoundOutput run_round(const ParamSet& global, std::uint32_t round);

  std::uint32_t id() const { return id_; }
  bool victim() const { return victim_; }
  const ModelDims& dims() const { return dims_; }
  const Dataset& local_train() const { return train_; }
  const Dataset& local_eval() const { return eval_; }
  /// Flip entries indexed by training-split row.
  const std::vector<LabelFlip>& flip_log() const { return flip_log_; }
  const AdamState& optimizer_state() const { return adam_; }

 private:
  std::uint32_t id_;
  bool victim_;
  ExperimentConfig config_;
  SeedMap seeds_;
  ModelDims dims_;
  Dataset train_;
  Dataset eval_;
  AdamState adam_;
  std::vector<LabelFlip> flip_log_;
};

/// Server-side state: the global model and the central test split.
class Coordinator {
 public:
  Coordinator(const ExperimentConfig& config, ModelDims dims, Dataset test);

  const ParamSet& global() const { return global_; }
  const ModelDims& dims() const { return dims_; }

  /// Aggregates exactly one update per client, evaluates the result on the
  /// test split and makes it the new global model.
  RoundRecord finish_round(std::uint32_t round, std::vector<ClientUpdate> updates,
                           std::vector<ClientMetrics> metrics);

 private:
  ExperimentConfig config_;
  ModelDims dims_;
  Dataset test_;
  ParamSet global_;
};

/// Model dimensions for a config and its data.
ModelDims model_dims(const ExperimentConfig& config, const Dataset& train);

/// Builds every client node of a simulation from prepared data.
std::vector<ClientNode> make_clients(const ExperimentConfig& config, const PreparedData& data);

struct RoundResult {
  ParamSet global;
  RoundRecord record;
};

/// One federated round over in-process clients (no central evaluation when
/// `test` is empty: aggregated metrics stay zero).
RoundResult run_round(const ParamSet& global, std::vector<ClientNode>& clients,
                      const ExperimentConfig& config, std::uint32_t round, const Dataset& test);

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<RoundRecord> rounds;
  ParamSet final_model;
  std::vector<LabelFlip> flip_log;
  bool complete = true;
  std::string failure;  // set when incomplete
  std::string mode = "simulation";
  double wall_time_s = 0.0;
};

/// Full deterministic simulation of `config.rounds` rounds.
ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace fedpoison
