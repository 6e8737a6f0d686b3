#include "fedpoison/orchestrator.hpp"

#include <algorithm>
#include <chrono>

#include <spdlog/spdlog.h>

#include "fedpoison/errors.hpp"
#include "fedpoison/metrics.hpp"

namespace fedpoison {

Dataset load_dataset(const ExperimentConfig& config, const SeedMap& seeds) {
  const auto& src = config.data;
  switch (src.kind) {
    case DataSource::Kind::synthetic:
      return make_synthetic(src.synthetic.n, src.synthetic.d, src.synthetic.c, src.synthetic.separation,
                            seeds.synthetic);
    case DataSource::Kind::cache:
      return read_cache(src.path);
    case DataSource::Kind::csv:
      return encode(csv::read_file(src.path), src.preprocess).data;
  }
  throw DataError("unknown data source");
}

PreparedData prepare_data(const ExperimentConfig& config, const SeedMap& seeds) {
  try {
    const Dataset raw = load_dataset(config, seeds);
    if (raw.size() < 2) throw DataError("dataset has fewer than two usable rows");
    SplitResult parts = split(raw, config.data.train_fraction, seeds.split);
    if (parts.test.empty()) throw DataError("test split is empty");
    PreparedData out;
    out.standardizer = Standardizer::fit(parts.train.features());
    out.train = out.standardizer.apply(parts.train);
    out.test = out.standardizer.apply(parts.test);
    out.train_rows = std::move(parts.train_rows);
    out.test_rows = std::move(parts.test_rows);
    out.plan = partition(out.train, config.n_clients, config.partition, seeds.partition);
    return out;
  } catch (const DataError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

ModelDims model_dims(const ExperimentConfig& config, const Dataset& train) {
  return ModelDims{train.num_features(), config.hidden, train.num_classes()};
}

ClientNode::ClientNode(std::uint32_t id, const Dataset& shard, std::vector<std::size_t> shard_rows,
                       const ExperimentConfig& config, bool victim)
    : id_(id), victim_(victim), config_(config), seeds_(derive_seeds(config.master_seed)) {
  if (shard.empty()) throw DataError("client " + std::to_string(id) + " received an empty shard");
  if (shard_rows.size() != shard.size()) throw std::invalid_argument("client shard row list size mismatch");

  Dataset local = shard;
  if (victim_) {
    AttackSpec spec = config.attack;
    spec.seed = seeds_.attack;
    auto poisoned = flip_labels(shard, spec);
    for (const auto& f : poisoned.flip_log) flip_log_.push_back({shard_rows[f.index], f.old_label, f.new_label});
    local = std::move(poisoned.poisoned);
    spdlog::info("client {}: flipped {} labels in classes {}", id, flip_log_.size(), poisoned.targets.size());
  }

  // Local holdout for early stopping and per-client metrics. Tiny shards
  // evaluate on their own training rows.
  if (local.size() >= 2) {
    SplitResult parts = split(local, 1.0 - config.data.local_eval_fraction, seeds_.local_holdout(id));
    train_ = std::move(parts.train);
    eval_ = parts.test.empty() ? train_ : std::move(parts.test);
  } else {
    train_ = local;
    eval_ = local;
  }
  dims_ = model_dims(config, shard);
  adam_ = AdamState(dims_.param_count(), config.optimizer);
}

ClientNode::RoundOutput ClientNode::run_round(const ParamSet& global, std::uint32_t round) {
  RoundOutput out;
  const Evaluation before = evaluate(global, eval_);
  out.metrics.client_id = id_;
  out.metrics.eval_loss = before.loss;
  out.metrics.eval_accuracy = before.accuracy;
  out.metrics.eval_f1 = f1_score(before.predictions, eval_.labels(), eval_.num_classes(), config_.f1_average);
  out.metrics.n_samples = train_.size();

  TrainSchedule schedule = config_.training;
  TrainResult trained = train_local(global, adam_, train_, eval_, schedule, seeds_.training(id_, round));
  out.metrics.epochs_run = static_cast<std::uint32_t>(trained.report.epochs_run);

  std::vector<double> params = trained.params.flatten();
  if (config_.dp.enabled) {
    // Clip and noise the change made this round, not the absolute weights.
    const auto g = global.values();
    std::vector<double> delta(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) delta[i] = params[i] - g[i];
    Random rng(seeds_.dp(id_, round));
    delta = dp_noise(delta, config_.dp.clip_norm, config_.dp.sigma, rng);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] = g[i] + delta[i];
  }
  out.update = ClientUpdate{id_, std::move(params), train_.size()};
  return out;
}

Coordinator::Coordinator(const ExperimentConfig& config, ModelDims dims, Dataset test)
    : config_(config), dims_(dims), test_(std::move(test)),
      global_(init_params(dims, derive_seeds(config.master_seed).init)) {}

namespace {

AggregateMetrics score(const ParamSet& params, const Dataset& test, F1Average average) {
  if (test.empty()) return {};
  const Evaluation ev = evaluate(params, test);
  return {ev.loss, ev.accuracy, f1_score(ev.predictions, test.labels(), test.num_classes(), average)};
}

// Aggregation plus central scoring, shared by the simulation and the server.
RoundResult close_round(const ExperimentConfig& config, ModelDims dims, const Dataset& test, std::uint32_t round,
                        const std::vector<ClientUpdate>& updates, std::vector<ClientMetrics> metrics) {
  for (const auto& u : updates) {
    if (u.params.size() != dims.param_count()) throw std::invalid_argument("client update has the wrong parameter count");
  }
  RoundResult result{ParamSet::unflatten(aggregate(updates, config.aggregator), dims), {}};
  std::sort(metrics.begin(), metrics.end(), [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  result.record = RoundRecord{round, std::move(metrics), score(result.global, test, config.f1_average)};
  return result;
}

void collect_updates(std::vector<ClientNode>& clients, const ParamSet& global, std::uint32_t round,
                     std::vector<ClientUpdate>& updates, std::vector<ClientMetrics>& metrics) {
  for (auto& client : clients) {
    try {
      auto out = client.run_round(global, round);
      updates.push_back(std::move(out.update));
      metrics.push_back(out.metrics);
    } catch (const std::exception& e) {
      throw std::runtime_error("round " + std::to_string(round) + ", client " + std::to_string(client.id()) +
                               ": " + e.what());
    }
  }
}

}  // namespace

RoundRecord Coordinator::finish_round(std::uint32_t round, std::vector<ClientUpdate> updates,
                                      std::vector<ClientMetrics> metrics) {
  if (updates.size() != config_.n_clients || metrics.size() != config_.n_clients) {
    throw std::logic_error("finish_round: expected one update and one metrics entry per client");
  }
  RoundResult result = close_round(config_, dims_, test_, round, updates, std::move(metrics));
  global_ = std::move(result.global);
  return std::move(result.record);
}

std::vector<ClientNode> make_clients(const ExperimentConfig& config, const PreparedData& data) {
  std::vector<ClientNode> clients;
  clients.reserve(config.n_clients);
  for (std::uint32_t id = 0; id < config.n_clients; ++id) {
    const auto& rows = data.plan.client_shards[id];
    const bool victim = config.attack.enabled && id == config.victim_client;
    clients.emplace_back(id, data.train.subset(rows), rows, config, victim);
  }
  return clients;
}

RoundResult run_round(const ParamSet& global, std::vector<ClientNode>& clients, const ExperimentConfig& config,
                      std::uint32_t round, const Dataset& test) {
  if (clients.empty()) throw std::invalid_argument("run_round: no clients");
  std::vector<ClientUpdate> updates;
  std::vector<ClientMetrics> metrics;
  collect_updates(clients, global, round, updates, metrics);
  return close_round(config, global.dims(), test, round, updates, std::move(metrics));
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  const SeedMap seeds = derive_seeds(config.master_seed);
  const PreparedData data = prepare_data(config, seeds);
  std::vector<ClientNode> clients = make_clients(config, data);

  ExperimentReport report;
  report.config = config;
  for (const auto& c : clients) {
    report.flip_log.insert(report.flip_log.end(), c.flip_log().begin(), c.flip_log().end());
  }

  Coordinator coordinator(config, model_dims(config, data.train), data.test);
  for (std::uint32_t round = 1; round <= config.rounds; ++round) {
    std::vector<ClientUpdate> updates;
    std::vector<ClientMetrics> metrics;
    collect_updates(clients, coordinator.global(), round, updates, metrics);
    report.rounds.push_back(coordinator.finish_round(round, std::move(updates), std::move(metrics)));
    const auto& agg = report.rounds.back().aggregated;
    spdlog::info("round {}/{}: test loss {:.4f} accuracy {:.4f} f1 {:.4f}", round, config.rounds, agg.test_loss,
                 agg.test_accuracy, agg.test_f1);
  }
  report.final_model = coordinator.global();
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace fedpoison
