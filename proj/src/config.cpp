#include "fedpoison/config.hpp"

#include <fstream>
#include <optional>
#include <set>

#include "fedpoison/errors.hpp"

namespace fedpoison {

using nlohmann::json;

namespace {

// Object reader that remembers which keys were consumed so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(where() + "must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = node_.find(key);
    if (it == node_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where() + "'" + key + "' has the wrong type");
    }
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    if (it == node_.end()) return std::nullopt;
    return Section(*it, path_ + key + ".");
  }

  void finish() const {
    for (const auto& [key, _] : node_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown config key '" + path_ + key + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config: " : "config '" + path_.substr(0, path_.size() - 1) + "': "; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

// Unsigned integers must not come from negative JSON numbers.
template <typename T>
void read_count(Section& s, const char* key, T& out) {
  std::int64_t v = static_cast<std::int64_t>(out);
  s.read(key, v);
  if (v < 0) throw ConfigError(std::string("config: '") + key + "' must be non-negative");
  out = static_cast<T>(v);
}

DataSource::Kind parse_source(const std::string& s) {
  if (s == "csv") return DataSource::Kind::csv;
  if (s == "cache") return DataSource::Kind::cache;
  if (s == "synthetic") return DataSource::Kind::synthetic;
  throw ConfigError("config: data.source must be csv, cache or synthetic");
}

std::string source_name(DataSource::Kind k) {
  switch (k) {
    case DataSource::Kind::csv:
      return "csv";
    case DataSource::Kind::cache:
      return "cache";
    case DataSource::Kind::synthetic:
      return "synthetic";
  }
  return "csv";
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig cfg;
  Section root(doc, "");
  read_count(root, "n_clients", cfg.n_clients);
  read_count(root, "rounds", cfg.rounds);
  {
    std::uint64_t seed = cfg.master_seed;
    root.read("master_seed", seed);
    cfg.master_seed = seed;
  }

  if (auto s = root.child("training")) {
    read_count(*s, "epochs_per_round", cfg.training.max_epochs);
    read_count(*s, "batch_size", cfg.training.batch_size);
    read_count(*s, "patience", cfg.training.patience);
    s->read("dropout", cfg.training.dropout_rate);
    s->finish();
  }
  if (auto s = root.child("model")) {
    read_count(*s, "hidden", cfg.hidden);
    s->finish();
  }
  if (auto s = root.child("optimizer")) {
    s->read("lr", cfg.optimizer.lr);
    s->read("beta1", cfg.optimizer.beta1);
    s->read("beta2", cfg.optimizer.beta2);
    s->read("eps", cfg.optimizer.eps);
    s->finish();
  }
  if (auto s = root.child("aggregator")) {
    std::string rule = to_string(cfg.aggregator.rule);
    s->read("rule", rule);
    try {
      cfg.aggregator.rule = parse_rule(rule);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    read_count(*s, "trim_k", cfg.aggregator.trim_k);
    read_count(*s, "krum_f", cfg.aggregator.krum_f);
    s->finish();
  }
  if (auto s = root.child("attack")) {
    s->read("enabled", cfg.attack.enabled);
    read_count(*s, "victim_client", cfg.victim_client);
    s->read("victim_fraction", cfg.attack.victim_fraction);
    s->read("target_classes", cfg.attack.target_classes);
    read_count(*s, "num_target_classes", cfg.attack.num_target_classes);
    s->read("pooled_fraction", cfg.attack.pooled_fraction);
    s->finish();
  }
  if (auto s = root.child("partition")) {
    std::string method = cfg.partition.kind == PartitionMethod::Kind::iid ? "iid" : "dirichlet";
    s->read("method", method);
    s->read("alpha", cfg.partition.alpha);
    if (method == "iid") {
      cfg.partition.kind = PartitionMethod::Kind::iid;
    } else if (method == "dirichlet") {
      cfg.partition.kind = PartitionMethod::Kind::dirichlet;
    } else {
      throw ConfigError("config: partition.method must be iid or dirichlet");
    }
    s->finish();
  }
  if (auto s = root.child("data")) {
    std::string source = source_name(cfg.data.kind);
    s->read("source", source);
    cfg.data.kind = parse_source(source);
    s->read("path", cfg.data.path);
    s->read("label_column", cfg.data.preprocess.label_column);
    s->read("drop_columns", cfg.data.preprocess.drop_columns);
    read_count(*s, "max_categories", cfg.data.preprocess.max_categories);
    s->read("train_fraction", cfg.data.train_fraction);
    s->read("local_eval_fraction", cfg.data.local_eval_fraction);
    if (auto syn = s->child("synthetic")) {
      read_count(*syn, "n", cfg.data.synthetic.n);
      read_count(*syn, "d", cfg.data.synthetic.d);
      read_count(*syn, "c", cfg.data.synthetic.c);
      syn->read("separation", cfg.data.synthetic.separation);
      syn->finish();
    }
    s->finish();
  }
  if (auto s = root.child("dp")) {
    s->read("enabled", cfg.dp.enabled);
    s->read("clip_norm", cfg.dp.clip_norm);
    s->read("sigma", cfg.dp.sigma);
    s->finish();
  }
  if (auto s = root.child("metrics")) {
    std::string avg = cfg.f1_average == F1Average::macro ? "macro" : "weighted";
    s->read("f1_average", avg);
    if (avg == "macro") {
      cfg.f1_average = F1Average::macro;
    } else if (avg == "weighted") {
      cfg.f1_average = F1Average::weighted;
    } else {
      throw ConfigError("config: metrics.f1_average must be macro or weighted");
    }
    s->finish();
  }
  if (auto s = root.child("transport")) {
    s->read("round_timeout_s", cfg.transport.round_timeout_s);
    s->read("ship_data", cfg.transport.ship_data);
    s->finish();
  }
  root.finish();
  validate(cfg);
  return cfg;
}

json config_to_json(const ExperimentConfig& c) {
  return json{
      {"n_clients", c.n_clients},
      {"rounds", c.rounds},
      {"master_seed", c.master_seed},
      {"training",
       {{"epochs_per_round", c.training.max_epochs},
        {"batch_size", c.training.batch_size},
        {"patience", c.training.patience},
        {"dropout", c.training.dropout_rate}}},
      {"model", {{"hidden", c.hidden}}},
      {"optimizer",
       {{"lr", c.optimizer.lr}, {"beta1", c.optimizer.beta1}, {"beta2", c.optimizer.beta2}, {"eps", c.optimizer.eps}}},
      {"aggregator", {{"rule", to_string(c.aggregator.rule)}, {"trim_k", c.aggregator.trim_k}, {"krum_f", c.aggregator.krum_f}}},
      {"attack",
       {{"enabled", c.attack.enabled},
        {"victim_client", c.victim_client},
        {"victim_fraction", c.attack.victim_fraction},
        {"target_classes", c.attack.target_classes},
        {"num_target_classes", c.attack.num_target_classes},
        {"pooled_fraction", c.attack.pooled_fraction}}},
      {"partition",
       {{"method", c.partition.kind == PartitionMethod::Kind::iid ? "iid" : "dirichlet"}, {"alpha", c.partition.alpha}}},
      {"data",
       {{"source", source_name(c.data.kind)},
        {"path", c.data.path},
        {"label_column", c.data.preprocess.label_column},
        {"drop_columns", c.data.preprocess.drop_columns},
        {"max_categories", c.data.preprocess.max_categories},
        {"train_fraction", c.data.train_fraction},
        {"local_eval_fraction", c.data.local_eval_fraction},
        {"synthetic",
         {{"n", c.data.synthetic.n}, {"d", c.data.synthetic.d}, {"c", c.data.synthetic.c}, {"separation", c.data.synthetic.separation}}}}},
      {"dp", {{"enabled", c.dp.enabled}, {"clip_norm", c.dp.clip_norm}, {"sigma", c.dp.sigma}}},
      {"metrics", {{"f1_average", c.f1_average == F1Average::macro ? "macro" : "weighted"}}},
      {"transport", {{"round_timeout_s", c.transport.round_timeout_s}, {"ship_data", c.transport.ship_data}}},
  };
}

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (c.n_clients == 0) fail("n_clients must be >= 1");
  if (c.n_clients > 64) fail("n_clients must be <= 64");
  if (c.rounds == 0) fail("rounds must be >= 1");
  if (c.training.batch_size == 0) fail("training.batch_size must be >= 1");
  if (c.training.patience == 0) fail("training.patience must be >= 1");
  if (!(c.training.dropout_rate >= 0.0 && c.training.dropout_rate < 1.0)) fail("training.dropout must lie in [0, 1)");
  if (c.hidden == 0) fail("model.hidden must be >= 1");
  if (!(c.optimizer.lr > 0.0)) fail("optimizer.lr must be > 0");
  if (!(c.optimizer.beta1 >= 0.0 && c.optimizer.beta1 < 1.0)) fail("optimizer.beta1 must lie in [0, 1)");
  if (!(c.optimizer.beta2 >= 0.0 && c.optimizer.beta2 < 1.0)) fail("optimizer.beta2 must lie in [0, 1)");
  if (!(c.optimizer.eps > 0.0)) fail("optimizer.eps must be > 0");
  if (c.attack.enabled && c.victim_client >= c.n_clients) fail("attack.victim_client must be < n_clients");
  if (!(c.attack.victim_fraction >= 0.0 && c.attack.victim_fraction <= 1.0)) fail("attack.victim_fraction must lie in [0, 1]");
  if (c.partition.kind == PartitionMethod::Kind::dirichlet && !(c.partition.alpha > 0.0)) fail("partition.alpha must be > 0");
  if (!(c.data.train_fraction > 0.0 && c.data.train_fraction < 1.0)) fail("data.train_fraction must lie in (0, 1)");
  if (!(c.data.local_eval_fraction > 0.0 && c.data.local_eval_fraction < 1.0)) fail("data.local_eval_fraction must lie in (0, 1)");
  if (c.data.kind != DataSource::Kind::synthetic && c.data.path.empty()) fail("data.path is required for csv and cache sources");
  if (c.data.kind == DataSource::Kind::synthetic) {
    const auto& s = c.data.synthetic;
    if (s.c < 2) fail("data.synthetic.c must be >= 2");
    if (s.n < s.c) fail("data.synthetic.n must be >= c");
    if (s.d < 2 || s.d + 1 < s.c) fail("data.synthetic.d must be >= max(2, c - 1)");
    if (!(s.separation > 0.0)) fail("data.synthetic.separation must be > 0");
  }
  if (c.dp.enabled && !(c.dp.clip_norm > 0.0)) fail("dp.clip_norm must be > 0");
  if (c.dp.enabled && !(c.dp.sigma >= 0.0)) fail("dp.sigma must be >= 0");
  if (!(c.transport.round_timeout_s > 0.0)) fail("transport.round_timeout_s must be > 0");
  const auto n = c.n_clients;
  switch (c.aggregator.rule) {
    case AggregatorKind::Rule::trimmed_mean:
      if (n <= 2 * c.aggregator.trim_k) fail("trimmed_mean needs n_clients > 2 * trim_k");
      break;
    case AggregatorKind::Rule::krum:
      if (n < c.aggregator.krum_f + 3) fail("krum needs n_clients >= krum_f + 3");
      break;
    default:
      break;
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  ExperimentConfig cfg = config_from_json(doc);
  if (!cfg.data.path.empty()) {
    std::filesystem::path data_path(cfg.data.path);
    if (data_path.is_relative()) cfg.data.path = (path.parent_path() / data_path).lexically_normal().string();
  }
  return cfg;
}

}  // namespace fedpoison
