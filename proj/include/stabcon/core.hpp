#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stabcon {

using ProcessId = int;

/// Opaque proposal payload. Consensus never inspects the bytes.
using Value = std::string;

// URB delivery planes: application messages feed the readiness vectors and
// bulkRead; consensus PROPOSAL envelopes are delivered straight to the
// protocol handlers.
constexpr uint8_t kAppStream = 0;
constexpr uint8_t kProtoStream = 1;

// ---------------------------------------------------------------------------
// Three-valued result domain
// ---------------------------------------------------------------------------

struct ConsensusResult {
  enum class Kind : uint8_t { Bot, TransientError, Decided };
  Kind kind = Kind::Bot;
  Value value;  // meaningful only when kind == Decided

  static ConsensusResult bot() { return {}; }
  static ConsensusResult transientError() { return {Kind::TransientError, {}}; }
  static ConsensusResult decided(Value v) { return {Kind::Decided, std::move(v)}; }

  bool isBot() const { return kind == Kind::Bot; }
  bool isError() const { return kind == Kind::TransientError; }
  bool isDecided() const { return kind == Kind::Decided; }

  friend bool operator==(const ConsensusResult& a, const ConsensusResult& b) {
    return a.kind == b.kind && (a.kind != Kind::Decided || a.value == b.value);
  }
  friend bool operator!=(const ConsensusResult& a, const ConsensusResult& b) { return !(a == b); }
};

/// Structural equality; the sentinels compare equal only to themselves.
inline bool valueEquals(const ConsensusResult& a, const ConsensusResult& b) { return a == b; }

// ---------------------------------------------------------------------------
// Readiness vectors
// ---------------------------------------------------------------------------

struct ReadyVector {
  std::vector<uint64_t> r;

  ReadyVector() = default;
  explicit ReadyVector(size_t n) : r(n, 0) {}

  size_t size() const { return r.size(); }
  uint64_t& operator[](size_t i) { return r[i]; }
  uint64_t operator[](size_t i) const { return r[i]; }

  void minWith(const ReadyVector& o) {
    if (r.size() < o.r.size()) r.resize(o.r.size(), 0);
    for (size_t i = 0; i < r.size(); ++i) {
      uint64_t ov = i < o.r.size() ? o.r[i] : 0;
      if (ov < r[i]) r[i] = ov;
    }
  }

  friend bool operator==(const ReadyVector& a, const ReadyVector& b) { return a.r == b.r; }
};

// ---------------------------------------------------------------------------
// Protocol messages
// ---------------------------------------------------------------------------

enum class MsgKind : uint8_t { Proposal = 1, Sync = 2, SyncAck = 3 };

/// Protocol-level envelope. Every message carries the consensus sequence tag
/// of the object it belongs to; SYNC/SYNCACK use the sn/seq/obsS/ready fields.
struct Message {
  MsgKind kind = MsgKind::Proposal;
  ProcessId sender = 0;
  ProcessId dest = -1;  // -1 for broadcast envelopes
  uint64_t tag = 0;
  std::optional<Value> value;  // Proposal payload; nullopt encodes Bot
  uint64_t sn = 0;
  uint64_t seq = 0;
  uint64_t obsS = 0;
  ReadyVector ready;

  friend bool operator==(const Message& a, const Message& b) {
    return a.kind == b.kind && a.sender == b.sender && a.dest == b.dest && a.tag == b.tag &&
           a.value == b.value && a.sn == b.sn && a.seq == b.seq && a.obsS == b.obsS &&
           a.ready == b.ready;
  }
};

// Canonical little-endian encoding with length-prefixed payloads. The fixed
// layout lets fault injection flip bytes deterministically and re-decode.
namespace wire {

inline void put8(std::string& out, uint8_t v) { out.push_back(static_cast<char>(v)); }
inline void put32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void putBytes(std::string& out, std::string_view b) {
  put32(out, static_cast<uint32_t>(b.size()));
  out.append(b.data(), b.size());
}

struct Reader {
  std::string_view in;
  size_t pos = 0;
  bool ok = true;

  uint8_t get8() {
    if (pos + 1 > in.size()) { ok = false; return 0; }
    return static_cast<uint8_t>(in[pos++]);
  }
  uint32_t get32() {
    if (pos + 4 > in.size()) { ok = false; return 0; }
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(in[pos++])) << (8 * i);
    return v;
  }
  uint64_t get64() {
    if (pos + 8 > in.size()) { ok = false; return 0; }
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(in[pos++])) << (8 * i);
    return v;
  }
  std::string getBytes() {
    uint32_t len = get32();
    if (!ok || pos + len > in.size()) { ok = false; return {}; }
    std::string b(in.substr(pos, len));
    pos += len;
    return b;
  }
  bool done() const { return ok && pos == in.size(); }
};

}  // namespace wire

inline std::string encodeMessage(const Message& m) {
  std::string out;
  wire::put8(out, static_cast<uint8_t>(m.kind));
  wire::put32(out, static_cast<uint32_t>(m.sender));
  wire::put32(out, static_cast<uint32_t>(m.dest));
  wire::put64(out, m.tag);
  switch (m.kind) {
    case MsgKind::Proposal:
      wire::put8(out, m.value.has_value() ? 1 : 0);
      if (m.value) wire::putBytes(out, *m.value);
      break;
    case MsgKind::Sync:
      wire::put64(out, m.sn);
      break;
    case MsgKind::SyncAck:
      wire::put64(out, m.sn);
      wire::put64(out, m.seq);
      wire::put64(out, m.obsS);
      wire::put32(out, static_cast<uint32_t>(m.ready.size()));
      for (uint64_t e : m.ready.r) wire::put64(out, e);
      break;
  }
  return out;
}

inline std::optional<Message> decodeMessage(std::string_view bytes) {
  wire::Reader rd{bytes};
  Message m;
  uint8_t kind = rd.get8();
  if (kind < 1 || kind > 3) return std::nullopt;
  m.kind = static_cast<MsgKind>(kind);
  m.sender = static_cast<int32_t>(rd.get32());
  m.dest = static_cast<int32_t>(rd.get32());
  m.tag = rd.get64();
  switch (m.kind) {
    case MsgKind::Proposal: {
      uint8_t has = rd.get8();
      if (has > 1) return std::nullopt;
      if (has) m.value = rd.getBytes();
      break;
    }
    case MsgKind::Sync:
      m.sn = rd.get64();
      break;
    case MsgKind::SyncAck: {
      m.sn = rd.get64();
      m.seq = rd.get64();
      m.obsS = rd.get64();
      uint32_t cnt = rd.get32();
      if (!rd.ok || cnt > 1024) return std::nullopt;
      m.ready.r.resize(cnt);
      for (uint32_t i = 0; i < cnt; ++i) m.ready.r[i] = rd.get64();
      break;
    }
  }
  if (!rd.done()) return std::nullopt;
  return m;
}

// ---------------------------------------------------------------------------
// Transport packets (the channel unit)
// ---------------------------------------------------------------------------

enum class PacketKind : uint8_t { UrbData = 1, UrbAck = 2, Direct = 3 };

struct Packet {
  PacketKind kind = PacketKind::Direct;
  ProcessId origin = -1;  // UrbData / UrbAck: transmission origin
  uint8_t stream = 0;
  uint64_t seq = 0;
  std::string body;  // UrbData payload bytes
  Message msg;       // Direct messages (SYNC / SYNCACK)
};

inline std::string encodePacket(const Packet& p) {
  std::string out;
  wire::put8(out, static_cast<uint8_t>(p.kind));
  wire::put32(out, static_cast<uint32_t>(p.origin));
  wire::put8(out, p.stream);
  wire::put64(out, p.seq);
  if (p.kind == PacketKind::UrbData) wire::putBytes(out, p.body);
  if (p.kind == PacketKind::Direct) wire::putBytes(out, encodeMessage(p.msg));
  return out;
}

inline std::optional<Packet> decodePacket(std::string_view bytes) {
  wire::Reader rd{bytes};
  Packet p;
  uint8_t kind = rd.get8();
  if (kind < 1 || kind > 3) return std::nullopt;
  p.kind = static_cast<PacketKind>(kind);
  p.origin = static_cast<int32_t>(rd.get32());
  p.stream = rd.get8();
  if (p.stream > 1) return std::nullopt;
  p.seq = rd.get64();
  if (p.kind == PacketKind::UrbData) p.body = rd.getBytes();
  if (p.kind == PacketKind::Direct) {
    auto m = decodeMessage(rd.getBytes());
    if (!m) return std::nullopt;
    p.msg = *m;
  }
  if (!rd.done()) return std::nullopt;
  return p;
}

// ---------------------------------------------------------------------------
// Transmission descriptors
// ---------------------------------------------------------------------------

/// Unique identifier of a URB transmission: (sender, stream, per-sender seq).
struct TxDescriptor {
  ProcessId sender = -1;
  uint8_t stream = kProtoStream;
  uint64_t seq = 0;
  uint64_t tag = 0;

  bool isBot() const { return sender < 0; }
  friend bool operator==(const TxDescriptor& a, const TxDescriptor& b) {
    return a.sender == b.sender && a.stream == b.stream && a.seq == b.seq;
  }
};

}  // namespace stabcon
