#include <thread>

#include <spdlog/spdlog.h>

#include "fedpoison/errors.hpp"
#include "fedpoison/transport.hpp"

namespace fedpoison {

namespace {

using net::Clock;

// Server-initiated end of the session; carries the process exit status.
struct Finished {
  int status;
};

// The socket went away; worth reconnecting.
struct Lost {
  std::string reason;
};

wire::Message next_message(net::FrameStream& stream, std::uint32_t id) {
  for (;;) {
    net::FrameStream::ReadResult got;
    try {
      got = stream.read(Clock::time_point::max());
    } catch (const TransportError& e) {
      throw Lost{e.what()};
    }
    switch (got.status) {
      case net::FrameStream::ReadStatus::closed:
      case net::FrameStream::ReadStatus::timeout:
        throw Lost{"server closed the connection"};
      case net::FrameStream::ReadStatus::unknown_type:
        spdlog::warn("client {}: ignoring unknown message type {}", id, got.frame.type);
        continue;
      case net::FrameStream::ReadStatus::frame:
        break;
    }
    if (got.frame.version != wire::kVersion) {
      spdlog::error("client {}: server speaks protocol version {}, this client speaks {}", id, got.frame.version,
                    wire::kVersion);
      throw Finished{1};
    }
    return wire::decode_message(got.frame);
  }
}

ClientNode build_node(const ClientOptions& options, const wire::JoinAckMsg& ack) {
  ExperimentConfig config = config_from_json(nlohmann::json::parse(ack.config_json));
  if (options.data_path) config.data.path = *options.data_path;
  validate(config);

  std::vector<std::size_t> rows(ack.shard_rows.begin(), ack.shard_rows.end());
  Dataset shard;
  if (ack.shard) {
    const auto& s = *ack.shard;
    if (s.n != rows.size() || s.features.size() != s.n * s.d || s.labels.size() != s.n) {
      throw DataError("shipped shard is inconsistent");
    }
    Matrix features(s.n, s.d);
    std::copy(s.features.begin(), s.features.end(), features.values().begin());
    shard = Dataset(std::move(features), s.labels, s.c);
  } else {
    const PreparedData data = prepare_data(config, derive_seeds(config.master_seed));
    for (auto r : rows) {
      if (r >= data.train.size()) throw DataError("assigned row " + std::to_string(r) + " is outside the local data");
    }
    shard = data.train.subset(rows);
  }
  return ClientNode(ack.client_id, shard, std::move(rows), config, ack.victim);
}

// One connection's worth of protocol. Returns only via Finished or Lost.
void session(const ClientOptions& options) {
  const std::uint32_t id = options.client_id;
  net::FrameStream stream([&] {
    try {
      return net::Socket::connect(options.server);
    } catch (const TransportError& e) {
      throw Lost{e.what()};
    }
  }());
  auto send = [&](const wire::Message& msg) {
    try {
      stream.send(msg);
    } catch (const TransportError& e) {
      throw Lost{e.what()};
    }
  };
  send(wire::JoinMsg{id});

  std::optional<ClientNode> node;
  std::uint32_t rounds_run = 0;
  for (;;) {
    wire::Message msg = next_message(stream, id);
    if (auto* ack = std::get_if<wire::JoinAckMsg>(&msg)) {
      if (ack->client_id != id) {
        spdlog::error("client {}: server assigned id {}", id, ack->client_id);
        throw Finished{1};
      }
      node.emplace(build_node(options, *ack));
      spdlog::info("client {}: joined with {} training rows{}", id, node->local_train().size(),
                   node->victim() ? " (victim)" : "");
    } else if (auto* gm = std::get_if<wire::GlobalModelMsg>(&msg)) {
      if (!node) {
        spdlog::error("client {}: model received before shard assignment", id);
        throw Finished{1};
      }
      if (gm->params.size() != node->dims().param_count()) {
        spdlog::error("client {}: global model has {} parameters, expected {}", id, gm->params.size(),
                      node->dims().param_count());
        throw Finished{1};
      }
      auto out = node->run_round(ParamSet::unflatten(gm->params, node->dims()), gm->round);
      const auto& m = out.metrics;
      send(wire::ClientUpdateMsg{gm->round, std::move(out.update.params), out.update.n_samples, id});
      send(wire::RoundMetricsMsg{gm->round, id, m.eval_loss, m.eval_accuracy, m.eval_f1, m.n_samples, m.epochs_run});
      ++rounds_run;
      spdlog::debug("client {}: round {} done", id, gm->round);
    } else if (std::holds_alternative<wire::ShutdownMsg>(msg)) {
      spdlog::info("client {}: shutdown after {} rounds", id, rounds_run);
      if (node && node->victim() && options.out_dir) {
        std::filesystem::create_directories(*options.out_dir);
        write_flip_log(*options.out_dir / "flip_log.csv", node->flip_log());
      }
      throw Finished{0};
    } else if (auto* err = std::get_if<wire::ErrorMsg>(&msg)) {
      spdlog::error("client {}: server error {}: {}", id, err->code, err->message);
      throw Finished{1};
    } else {
      spdlog::warn("client {}: ignoring unexpected message type {}", id,
                   static_cast<int>(wire::message_type(msg)));
    }
  }
}

}  // namespace

int client_loop(const ClientOptions& options) {
  int failures = 0;
  for (;;) {
    try {
      session(options);
    } catch (const Finished& f) {
      return f.status;
    } catch (const Lost& lost) {
      if (failures >= options.max_reconnects) {
        spdlog::error("client {}: {}; giving up after {} reconnect attempts", options.client_id, lost.reason,
                      failures);
        return 1;
      }
      const auto delay = options.backoff_base * (1 << failures);
      ++failures;
      spdlog::warn("client {}: {}; reconnecting in {} ms", options.client_id, lost.reason, delay.count());
      std::this_thread::sleep_for(delay);
    } catch (const ConfigError& e) {
      spdlog::error("client {}: config error: {}", options.client_id, e.what());
      return 2;
    } catch (const DataError& e) {
      spdlog::error("client {}: data error: {}", options.client_id, e.what());
      return 3;
    } catch (const nlohmann::json::exception& e) {
      spdlog::error("client {}: config error: {}", options.client_id, e.what());
      return 2;
    } catch (const std::exception& e) {
      spdlog::error("client {}: {}", options.client_id, e.what());
      return 1;
    }
  }
}

}  // namespace fedpoison
