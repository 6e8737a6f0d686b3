#include "fedpoison/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "fedpoison/bytes.hpp"

namespace fedpoison::wire {
namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'L', 'P', 'B'};

bool known_type(std::uint16_t t) { return t >= 1 && t <= 7; }

void put_params(ByteWriter& w, const std::vector<double>& params) {
  w.put_u64(params.size());
  for (double p : params) w.put_f64(p);
}

std::vector<double> get_params(ByteReader& r) {
  const auto count = r.get_u64();
  if (count > r.remaining() / 8) throw ProtocolError("parameter count exceeds payload");
  std::vector<double> params(count);
  for (double& p : params) {
    p = r.get_f64();
    if (!std::isfinite(p)) throw ProtocolError("non-finite model parameter");
  }
  return params;
}

struct PayloadWriter {
  ByteWriter& w;

  void operator()(const JoinMsg& m) const { w.put_u32(m.client_id); }
  void operator()(const JoinAckMsg& m) const {
    w.put_u32(m.client_id);
    w.put_u8(m.victim ? 1 : 0);
    w.put_u8(m.shard ? 1 : 0);
    w.put_string(m.config_json);
    w.put_u64(m.shard_rows.size());
    for (auto row : m.shard_rows) w.put_u64(row);
    if (m.shard) {
      w.put_u64(m.shard->n);
      w.put_u64(m.shard->d);
      w.put_u32(m.shard->c);
      for (double x : m.shard->features) w.put_f64(x);
      for (auto y : m.shard->labels) w.put_u32(y);
    }
  }
  void operator()(const GlobalModelMsg& m) const {
    w.put_u32(m.round);
    put_params(w, m.params);
    w.put_u32(m.client_id);
  }
  void operator()(const ClientUpdateMsg& m) const {
    w.put_u32(m.round);
    put_params(w, m.params);
    w.put_u64(m.n_samples);
    w.put_u32(m.client_id);
  }
  void operator()(const RoundMetricsMsg& m) const {
    w.put_u32(m.round);
    w.put_u32(m.client_id);
    w.put_f64(m.loss);
    w.put_f64(m.accuracy);
    w.put_f64(m.f1);
    w.put_u64(m.n_samples);
    w.put_u32(m.epochs_run);
  }
  void operator()(const ShutdownMsg&) const {}
  void operator()(const ErrorMsg& m) const {
    w.put_u16(m.code);
    w.put_string(m.message);
  }
};

Message parse_payload(MsgType type, ByteReader& r) {
  switch (type) {
    case MsgType::join:
      return JoinMsg{r.get_u32()};
    case MsgType::join_ack: {
      JoinAckMsg m;
      m.client_id = r.get_u32();
      m.victim = r.get_u8() != 0;
      const bool ship = r.get_u8() != 0;
      m.config_json = r.get_string();
      const auto rows = r.get_u64();
      if (rows > r.remaining() / 8) throw ProtocolError("shard row count exceeds payload");
      m.shard_rows.resize(rows);
      for (auto& row : m.shard_rows) row = r.get_u64();
      if (ship) {
        ShardData s;
        s.n = r.get_u64();
        s.d = r.get_u64();
        s.c = r.get_u32();
        if (s.d != 0 && s.n > r.remaining() / (8 * s.d)) throw ProtocolError("shard size exceeds payload");
        s.features.resize(s.n * s.d);
        for (double& x : s.features) x = r.get_f64();
        if (s.n > r.remaining() / 4) throw ProtocolError("shard labels exceed payload");
        s.labels.resize(s.n);
        for (auto& y : s.labels) y = r.get_u32();
        m.shard = std::move(s);
      }
      return m;
    }
    case MsgType::global_model: {
      GlobalModelMsg m;
      m.round = r.get_u32();
      m.params = get_params(r);
      m.client_id = r.get_u32();
      return m;
    }
    case MsgType::client_update: {
      ClientUpdateMsg m;
      m.round = r.get_u32();
      m.params = get_params(r);
      m.n_samples = r.get_u64();
      m.client_id = r.get_u32();
      return m;
    }
    case MsgType::round_metrics: {
      RoundMetricsMsg m;
      m.round = r.get_u32();
      m.client_id = r.get_u32();
      m.loss = r.get_f64();
      m.accuracy = r.get_f64();
      m.f1 = r.get_f64();
      m.n_samples = r.get_u64();
      m.epochs_run = r.get_u32();
      return m;
    }
    case MsgType::shutdown:
      return ShutdownMsg{};
    case MsgType::error: {
      ErrorMsg m;
      m.code = r.get_u16();
      m.message = r.get_string();
      return m;
    }
  }
  throw ProtocolError("unknown message type");
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  if (frame.payload.size() > kMaxPayload) throw ProtocolError("payload exceeds 64 MiB");
  ByteWriter w;
  w.put_bytes(kMagic);
  w.put_u16(frame.version);
  w.put_u16(frame.type);
  w.put_u32(static_cast<std::uint32_t>(frame.payload.size()));
  w.put_bytes(frame.payload);
  return std::move(w).take();
}

DecodeResult decode_frame(std::span<const std::uint8_t> buffer) {
  DecodeResult out;
  // Reject a bad magic as soon as the bytes that disagree have arrived.
  const std::size_t magic_bytes = std::min<std::size_t>(buffer.size(), 4);
  if (!std::equal(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(magic_bytes), kMagic)) {
    throw ProtocolError("bad frame magic");
  }
  if (buffer.size() < kHeaderSize) return out;
  ByteReader r(buffer.subspan(4));
  out.frame.version = r.get_u16();
  out.frame.type = r.get_u16();
  const std::uint32_t len = r.get_u32();
  if (len > kMaxPayload) throw ProtocolError("declared payload of " + std::to_string(len) + " bytes exceeds 64 MiB");
  if (buffer.size() - kHeaderSize < len) return out;
  const auto payload = buffer.subspan(kHeaderSize, len);
  out.frame.payload.assign(payload.begin(), payload.end());
  out.consumed = kHeaderSize + len;
  out.status = known_type(out.frame.type) ? DecodeResult::Status::frame : DecodeResult::Status::unknown_type;
  return out;
}

MsgType message_type(const Message& msg) { return static_cast<MsgType>(msg.index() + 1); }

Frame to_frame(const Message& msg) {
  ByteWriter w;
  std::visit(PayloadWriter{w}, msg);
  return Frame{kVersion, static_cast<std::uint16_t>(message_type(msg)), std::move(w).take()};
}

std::vector<std::uint8_t> encode(const Message& msg) { return encode_frame(to_frame(msg)); }

Message decode_message(const Frame& frame) {
  if (!known_type(frame.type)) throw ProtocolError("unknown message type " + std::to_string(frame.type));
  ByteReader r(frame.payload);
  Message msg;
  try {
    msg = parse_payload(static_cast<MsgType>(frame.type), r);
  } catch (const ShortBuffer&) {
    throw ProtocolError("truncated payload for message type " + std::to_string(frame.type));
  }
  if (r.remaining() != 0) throw ProtocolError("trailing bytes in payload of message type " + std::to_string(frame.type));
  return msg;
}

}  // namespace fedpoison::wire
