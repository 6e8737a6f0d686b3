#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "fedpoison/errors.hpp"
#include "fedpoison/transport.hpp"

namespace fedpoison {

namespace {

using net::Clock;

struct Event {
  enum class Kind { frame, unknown_type, closed, corrupt };
  std::size_t conn = 0;
  Kind kind = Kind::closed;
  wire::Frame frame;
  std::string detail;
};

class EventQueue {
 public:
  void push(Event e) {
    {
      std::lock_guard lock(mutex_);
      events_.push_back(std::move(e));
    }
    ready_.notify_one();
  }

  std::optional<Event> pop(Clock::time_point deadline) {
    std::unique_lock lock(mutex_);
    if (!ready_.wait_until(lock, deadline, [&] { return !events_.empty(); })) return std::nullopt;
    Event e = std::move(events_.front());
    events_.pop_front();
    return e;
  }

 private:
  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<Event> events_;
};

struct Connection {
  explicit Connection(net::Socket s) : stream(std::move(s)) {}
  net::FrameStream stream;
  std::thread reader;
  std::optional<std::uint32_t> client_id;
  bool dropped = false;
};

// Thrown inside the round loop to end the experiment early.
struct Abort {
  std::string reason;
};

}  // namespace

struct Server::Impl {
  ExperimentConfig config;
  net::Listener listener;
  std::function<void(const wire::ClientUpdateMsg&)> update_hook;

  EventQueue queue;
  std::atomic<bool> stopping{false};
  std::vector<std::unique_ptr<Connection>> conns;
  std::vector<Connection*> by_client;

  Impl(ExperimentConfig c, const net::Endpoint& ep) : config(std::move(c)), listener(ep) {}

  ~Impl() { stop_readers(); }

  void start_reader(std::size_t index) {
    Connection& conn = *conns[index];
    conn.reader = std::thread([this, index, &conn] {
      for (;;) {
        Event ev;
        ev.conn = index;
        try {
          auto got = conn.stream.read(Clock::now() + std::chrono::milliseconds(200));
          if (got.status == net::FrameStream::ReadStatus::timeout) {
            if (stopping) return;
            continue;
          }
          if (got.status == net::FrameStream::ReadStatus::closed) {
            ev.kind = Event::Kind::closed;
          } else {
            ev.kind = got.status == net::FrameStream::ReadStatus::frame ? Event::Kind::frame
                                                                         : Event::Kind::unknown_type;
            ev.frame = std::move(got.frame);
          }
        } catch (const std::exception& e) {
          ev.kind = Event::Kind::corrupt;
          ev.detail = e.what();
        }
        const bool last = ev.kind == Event::Kind::closed || ev.kind == Event::Kind::corrupt;
        queue.push(std::move(ev));
        if (last) return;
      }
    });
  }

  void stop_readers() {
    stopping = true;
    for (auto& c : conns) c->stream.socket().shutdown();
    for (auto& c : conns) {
      if (c->reader.joinable()) c->reader.join();
    }
  }

  // Best effort: the peer may already be gone.
  bool send(Connection& conn, const wire::Message& msg) {
    if (conn.dropped) return false;
    try {
      conn.stream.send(msg);
      return true;
    } catch (const TransportError& e) {
      spdlog::debug("send failed: {}", e.what());
      return false;
    }
  }

  void drop(Connection& conn, std::uint16_t code, const std::string& why) {
    send(conn, wire::ErrorMsg{code, why});
    conn.dropped = true;
    conn.stream.socket().shutdown_write();
    if (conn.client_id && by_client[*conn.client_id] == &conn) by_client[*conn.client_id] = nullptr;
  }

  std::size_t joined() const {
    return static_cast<std::size_t>(std::count_if(by_client.begin(), by_client.end(), [](auto* c) { return c; }));
  }

  void handle_join_event(Event& ev) {
    Connection& conn = *conns[ev.conn];
    if (conn.dropped) return;
    switch (ev.kind) {
      case Event::Kind::closed:
      case Event::Kind::corrupt:
        if (conn.client_id && by_client[*conn.client_id] == &conn) {
          spdlog::warn("client {} left before the experiment started", *conn.client_id);
          by_client[*conn.client_id] = nullptr;
        }
        conn.dropped = true;
        return;
      case Event::Kind::unknown_type:
        send(conn, wire::ErrorMsg{wire::ErrorMsg::unexpected_message,
                                  "unknown message type " + std::to_string(ev.frame.type)});
        return;
      case Event::Kind::frame:
        break;
    }
    if (ev.frame.version != wire::kVersion) {
      drop(conn, wire::ErrorMsg::version_mismatch,
           "protocol version " + std::to_string(ev.frame.version) + " not supported (server speaks " +
               std::to_string(wire::kVersion) + ")");
      return;
    }
    wire::Message msg;
    try {
      msg = wire::decode_message(ev.frame);
    } catch (const wire::ProtocolError& e) {
      drop(conn, wire::ErrorMsg::generic, e.what());
      return;
    }
    const auto* join = std::get_if<wire::JoinMsg>(&msg);
    if (!join || conn.client_id) {
      send(conn, wire::ErrorMsg{wire::ErrorMsg::unexpected_message, "expected JOIN"});
      return;
    }
    const std::uint32_t id = join->client_id;
    if (id >= config.n_clients) {
      drop(conn, wire::ErrorMsg::bad_client_id,
           "client id " + std::to_string(id) + " out of range for " + std::to_string(config.n_clients) + " clients");
      return;
    }
    if (by_client[id]) {
      drop(conn, wire::ErrorMsg::duplicate_client, "client id " + std::to_string(id) + " already joined");
      return;
    }
    conn.client_id = id;
    by_client[id] = &conn;
    spdlog::info("client {} joined ({}/{})", id, joined(), config.n_clients);
  }

  void await_clients() {
    const auto deadline = Clock::now() + timeout();
    while (joined() < config.n_clients) {
      if (Clock::now() >= deadline) {
        throw Abort{"timed out waiting for clients: " + std::to_string(joined()) + " of " +
                    std::to_string(config.n_clients) + " joined"};
      }
      if (auto s = listener.accept(std::chrono::milliseconds(50))) {
        conns.push_back(std::make_unique<Connection>(std::move(*s)));
        start_reader(conns.size() - 1);
      }
      while (auto ev = queue.pop(Clock::now())) handle_join_event(*ev);
    }
    listener.close();
  }

  Clock::duration timeout() const {
    return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(config.transport.round_timeout_s));
  }

  void send_assignments(const PreparedData& data) {
    const std::string config_json = config_to_json(config).dump();
    for (std::uint32_t id = 0; id < config.n_clients; ++id) {
      const auto& rows = data.plan.client_shards[id];
      wire::JoinAckMsg ack;
      ack.client_id = id;
      ack.victim = config.attack.enabled && id == config.victim_client;
      ack.config_json = config_json;
      ack.shard_rows.assign(rows.begin(), rows.end());
      if (config.transport.ship_data) {
        const Dataset shard = data.train.subset(rows);
        const auto values = shard.features().values();
        ack.shard = wire::ShardData{shard.size(), shard.num_features(), shard.num_classes(),
                                    std::vector<double>(values.begin(), values.end()), shard.labels()};
      }
      if (!send(*by_client[id], ack)) throw Abort{"client " + std::to_string(id) + " lost before assignment"};
    }
  }

  RoundRecord run_round(Coordinator& coordinator, std::uint32_t round) {
    const auto global = coordinator.global().flatten();
    for (std::uint32_t id = 0; id < config.n_clients; ++id) {
      if (!send(*by_client[id], wire::GlobalModelMsg{round, global, id})) {
        throw Abort{"client " + std::to_string(id) + " lost in round " + std::to_string(round)};
      }
    }

    const std::size_t n = config.n_clients;
    std::vector<std::optional<ClientUpdate>> updates(n);
    std::vector<std::optional<ClientMetrics>> metrics(n);
    auto pending = [&] {
      std::vector<std::uint32_t> ids;
      for (std::uint32_t id = 0; id < n; ++id) {
        if (!updates[id] || !metrics[id]) ids.push_back(id);
      }
      return ids;
    };
    const std::string where = " in round " + std::to_string(round);
    const auto deadline = Clock::now() + timeout();

    while (!pending().empty()) {
      auto ev = queue.pop(deadline);
      if (!ev) {
        std::string ids;
        for (auto id : pending()) ids += (ids.empty() ? "" : ",") + std::to_string(id);
        throw Abort{"timed out" + where + " waiting for client(s) " + ids};
      }
      Connection& conn = *conns[ev->conn];
      if (conn.dropped || !conn.client_id) continue;
      const std::uint32_t id = *conn.client_id;
      const std::string who = "client " + std::to_string(id);
      if (ev->kind == Event::Kind::closed) throw Abort{who + " disconnected" + where};
      if (ev->kind == Event::Kind::corrupt) throw Abort{who + " sent a corrupt stream" + where + ": " + ev->detail};
      if (ev->kind == Event::Kind::unknown_type) {
        send(conn, wire::ErrorMsg{wire::ErrorMsg::unexpected_message,
                                  "unknown message type " + std::to_string(ev->frame.type)});
        continue;
      }
      wire::Message msg;
      try {
        msg = wire::decode_message(ev->frame);
      } catch (const wire::ProtocolError& e) {
        throw Abort{who + " sent a malformed message" + where + ": " + e.what()};
      }
      if (auto* u = std::get_if<wire::ClientUpdateMsg>(&msg)) {
        if (u->round != round || u->client_id != id || updates[id]) throw Abort{who + " sent an unexpected update" + where};
        if (u->params.size() != global.size()) throw Abort{who + " sent an update of the wrong size" + where};
        if (update_hook) update_hook(*u);
        updates[id] = ClientUpdate{id, std::move(u->params), u->n_samples};
      } else if (auto* m = std::get_if<wire::RoundMetricsMsg>(&msg)) {
        if (m->round != round || m->client_id != id || metrics[id]) throw Abort{who + " sent unexpected metrics" + where};
        metrics[id] = ClientMetrics{id, m->loss, m->accuracy, m->f1, m->n_samples, m->epochs_run};
      } else if (auto* err = std::get_if<wire::ErrorMsg>(&msg)) {
        throw Abort{who + " reported an error" + where + ": " + err->message};
      } else {
        send(conn, wire::ErrorMsg{wire::ErrorMsg::unexpected_message, "unexpected message" + where});
      }
    }

    // Round barrier: every client's update and metrics are in hand.
    std::vector<ClientUpdate> u;
    std::vector<ClientMetrics> m;
    for (std::size_t id = 0; id < n; ++id) {
      u.push_back(std::move(*updates[id]));
      m.push_back(*metrics[id]);
    }
    return coordinator.finish_round(round, std::move(u), std::move(m));
  }

  ExperimentReport run() {
    const auto start = Clock::now();
    const SeedMap seeds = derive_seeds(config.master_seed);
    const PreparedData data = prepare_data(config, seeds);

    ExperimentReport report;
    report.config = config;
    report.mode = "wire";
    // The victim poisons its own shard; the server repeats the (seeded) attack
    // only to record which rows were flipped.
    if (config.attack.enabled) {
      const auto& rows = data.plan.client_shards[config.victim_client];
      ClientNode victim(config.victim_client, data.train.subset(rows), rows, config, true);
      report.flip_log = victim.flip_log();
    }

    Coordinator coordinator(config, model_dims(config, data.train), data.test);
    by_client.assign(config.n_clients, nullptr);
    try {
      spdlog::info("waiting for {} clients on port {}", config.n_clients, listener.port());
      await_clients();
      send_assignments(data);
      for (std::uint32_t round = 1; round <= config.rounds; ++round) {
        report.rounds.push_back(run_round(coordinator, round));
        const auto& agg = report.rounds.back().aggregated;
        spdlog::info("round {}/{}: test loss {:.4f} accuracy {:.4f} f1 {:.4f}", round, config.rounds, agg.test_loss,
                     agg.test_accuracy, agg.test_f1);
      }
      for (auto* c : by_client) send(*c, wire::ShutdownMsg{});
    } catch (const Abort& a) {
      spdlog::error("experiment aborted: {}", a.reason);
      report.complete = false;
      report.failure = a.reason;
      for (auto& c : conns) {
        if (c->client_id && !c->dropped) send(*c, wire::ErrorMsg{wire::ErrorMsg::aborted, a.reason});
      }
    }
    listener.close();
    report.final_model = coordinator.global();
    report.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
    return report;
  }
};

Server::Server(ExperimentConfig config, const net::Endpoint& listen) {
  validate(config);
  impl_ = std::make_unique<Impl>(std::move(config), listen);
}

Server::~Server() = default;

std::uint16_t Server::port() const { return impl_->listener.port(); }

void Server::on_update(std::function<void(const wire::ClientUpdateMsg&)> hook) { impl_->update_hook = std::move(hook); }

ExperimentReport Server::run() {
  ExperimentReport report = impl_->run();
  impl_->stop_readers();
  return report;
}

}  // namespace fedpoison
