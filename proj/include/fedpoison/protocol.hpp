#pragma once

// Frame layout (all integers little-endian):
//
//   offset 0   4 bytes  magic "FLPB"
//   offset 4   u16      protocol version (1)
//   offset 6   u16      message type
//   offset 8   u32      payload length (<= 64 MiB)
//   offset 12  payload
//
// Payloads:
//   JOIN           u32 client_id
//   JOIN_ACK       u32 client_id, u8 victim, u8 ship_data, str config_json,
//                  u64 row_count, row_count x u64 training-split rows,
//                  [ship_data: u64 n, u64 d, u32 c, n*d x f64, n x u32 labels]
//   GLOBAL_MODEL   u32 round, u64 param_count, param_count x f64, u32 client_id
//   CLIENT_UPDATE  u32 round, u64 param_count, param_count x f64, u64 n_samples, u32 client_id
//   ROUND_METRICS  u32 round, u32 client_id, f64 loss, f64 accuracy, f64 f1,
//                  u64 n_samples, u32 epochs_run
//   SHUTDOWN       (empty)
//   ERROR          u16 code, str message
//
// `str` is a u32 byte length followed by UTF-8 bytes.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fedpoison/dataset.hpp"

namespace fedpoison::wire {

inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 12;
inline constexpr std::uint32_t kMaxPayload = 64u * 1024u * 1024u;
inline constexpr std::uint16_t kDefaultPort = 9099;

enum class MsgType : std::uint16_t {
  join = 1,
  join_ack = 2,
  global_model = 3,
  client_update = 4,
  round_metrics = 5,
  shutdown = 6,
  error = 7,
};

/// Malformed stream: bad magic, oversize or inconsistent payload.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Frame {
  std::uint16_t version = kVersion;
  std::uint16_t type = 0;
  std::vector<std::uint8_t> payload;
  bool operator==(const Frame&) const = default;
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);

struct DecodeResult {
  enum class Status {
    frame,         // `frame` holds a known message type
    need_more,     // buffer ends inside a frame
    unknown_type,  // complete frame of an unknown type; skip `consumed` bytes
  };
  Status status = Status::need_more;
  Frame frame;
  std::size_t consumed = 0;
};

/// Decodes the first frame in `buffer`. Throws ProtocolError on bad magic or
/// a declared payload above the limit.
DecodeResult decode_frame(std::span<const std::uint8_t> buffer);

struct JoinMsg {
  std::uint32_t client_id = 0;
  bool operator==(const JoinMsg&) const = default;
};

struct ShardData {
  std::uint64_t n = 0;
  std::uint64_t d = 0;
  std::uint32_t c = 0;
  std::vector<double> features;
  std::vector<std::uint32_t> labels;
  bool operator==(const ShardData&) const = default;
};

struct JoinAckMsg {
  std::uint32_t client_id = 0;
  bool victim = false;
  std::string config_json;
  std::vector<std::uint64_t> shard_rows;
  std::optional<ShardData> shard;  // present when the server ships data
  bool operator==(const JoinAckMsg&) const = default;
};

struct GlobalModelMsg {
  std::uint32_t round = 0;
  std::vector<double> params;
  std::uint32_t client_id = 0;
  bool operator==(const GlobalModelMsg&) const = default;
};

struct ClientUpdateMsg {
  std::uint32_t round = 0;
  std::vector<double> params;
  std::uint64_t n_samples = 0;
  std::uint32_t client_id = 0;
  bool operator==(const ClientUpdateMsg&) const = default;
};

struct RoundMetricsMsg {
  std::uint32_t round = 0;
  std::uint32_t client_id = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::uint64_t n_samples = 0;
  std::uint32_t epochs_run = 0;
  bool operator==(const RoundMetricsMsg&) const = default;
};

struct ShutdownMsg {
  bool operator==(const ShutdownMsg&) const = default;
};

struct ErrorMsg {
  enum Code : std::uint16_t {
    generic = 1,
    duplicate_client = 2,
    bad_client_id = 3,
    version_mismatch = 4,
    aborted = 5,
    unexpected_message = 6,
  };
  std::uint16_t code = generic;
  std::string message;
  bool operator==(const ErrorMsg&) const = default;
};

using Message =
    std::variant<JoinMsg, JoinAckMsg, GlobalModelMsg, ClientUpdateMsg, RoundMetricsMsg, ShutdownMsg, ErrorMsg>;

MsgType message_type(const Message& msg);

/// Full frame bytes for a message.
std::vector<std::uint8_t> encode(const Message& msg);
Frame to_frame(const Message& msg);

/// Parses a frame of known type. Throws ProtocolError when the payload does
/// not match its type's layout (or model parameters are not finite).
Message decode_message(const Frame& frame);

}  // namespace fedpoison::wire
