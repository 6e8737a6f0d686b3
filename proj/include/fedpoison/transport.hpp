#pragma once

// Distributed roles: one server process driving the round loop over TCP and
// one process per client.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "fedpoison/config.hpp"
#include "fedpoison/orchestrator.hpp"
#include "fedpoison/protocol.hpp"
#include "fedpoison/socket.hpp"

namespace fedpoison {

class Server {
 public:
  /// Validates the config and binds the listening socket (port 0 picks an
  /// ephemeral port). Throws ConfigError or TransportError.
  Server(ExperimentConfig config, const net::Endpoint& listen);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const;

  /// Observes every accepted CLIENT_UPDATE before aggregation.
  void on_update(std::function<void(const wire::ClientUpdateMsg&)> hook);

  /// Waits for all clients, runs every round and shuts the clients down.
  /// A lost or silent client aborts the run: the report comes back with
  /// complete == false and the rounds finished so far. Throws DataError when
  /// the server's own data cannot be prepared.
  ExperimentReport run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ClientOptions {
  net::Endpoint server;
  std::uint32_t client_id = 0;
  /// Replaces the data path from the server's config (index mode).
  std::optional<std::string> data_path;
  /// The victim writes its flip_log.csv here when set.
  std::optional<std::filesystem::path> out_dir;
  /// Reconnect delays are base, 2*base, 4*base.
  std::chrono::milliseconds backoff_base{1000};
  int max_reconnects = 3;
};

/// Exit status: 0 after SHUTDOWN, 1 on transport failure or a server ERROR,
/// 2 on an unusable config, 3 on unusable data.
int client_loop(const ClientOptions& options);

}  // namespace fedpoison
