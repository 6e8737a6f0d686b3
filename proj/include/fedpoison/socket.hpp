#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedpoison/protocol.hpp"

namespace fedpoison::net {

using Clock = std::chrono::steady_clock;

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = wire::kDefaultPort;
};

/// "host:port", "host" (default port) or ":port" (all interfaces).
Endpoint parse_endpoint(const std::string& text);

/// Owned TCP stream socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  /// Throws TransportError when the peer cannot be reached.
  static Socket connect(const Endpoint& endpoint);

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  void send_all(std::span<const std::uint8_t> bytes);
  /// Reads at most `max` bytes, waiting until `deadline`. Returns nullopt on
  /// timeout and an empty vector on orderly shutdown by the peer.
  std::optional<std::vector<std::uint8_t>> recv_some(std::size_t max, Clock::time_point deadline);

  /// Unblocks readers in other threads without releasing the descriptor.
  void shutdown();
  /// Half-close: the peer still reads what was already sent, then EOF.
  void shutdown_write();
  void close();

 private:
  int fd_ = -1;
};

class Listener {
 public:
  /// Binds and listens; port 0 picks an ephemeral port.
  explicit Listener(const Endpoint& endpoint);
  std::uint16_t port() const { return port_; }

  /// Waits up to `timeout` for a connection.
  std::optional<Socket> accept(std::chrono::milliseconds timeout);
  void close() { socket_.close(); }

 private:
  Socket socket_;
  std::uint16_t port_ = 0;
};

/// Frames over a socket, with read buffering.
class FrameStream {
 public:
  explicit FrameStream(Socket socket) : socket_(std::move(socket)) {}

  void send(const wire::Message& msg);
  void send_frame(const wire::Frame& frame);

  enum class ReadStatus { frame, unknown_type, closed, timeout };
  struct ReadResult {
    ReadStatus status;
    wire::Frame frame;
  };
  /// Next complete frame. Throws wire::ProtocolError on a corrupt stream.
  ReadResult read(Clock::time_point deadline);

  Socket& socket() { return socket_; }

 private:
  Socket socket_;
  std::vector<std::uint8_t> buffer_;
};

}  // namespace fedpoison::net
