#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "stabcon/core.hpp"
#include "stabcon/env.hpp"

namespace stabcon {

/// Uniform reliable broadcast with FIFO delivery, driven by the simulator.
///
/// The sender keeps per-receiver acknowledgement sets and retransmits until
/// every trusted process has acknowledged. Receivers buffer out-of-order
/// arrivals and expose contiguous readiness per sender. Uniformity with a
/// crashed sender is preserved by letting any process that holds a message
/// whose origin is no longer trusted re-offer it to the others.
class UrbNode {
 public:
  struct OutTx {
    std::string body;
    uint64_t tag = 0;
    std::set<ProcessId> acked;
  };

  struct InStream {
    uint64_t consumed = 0;                    // highest seq handed to the application
    std::map<uint64_t, std::string> buffer;   // every received payload, kept for relay
  };

  ProcessId self = 0;
  int n = 0;
  std::array<uint64_t, 2> nextSeq{1, 1};
  std::array<std::map<uint64_t, OutTx>, 2> outbox;
  std::vector<std::array<InStream, 2>> in;

  UrbNode() = default;
  UrbNode(ProcessId id, int nodes) : self(id), n(nodes), in(nodes) {}

  // ---- sender side ----

  TxDescriptor broadcast(Env& env, uint8_t stream, uint64_t tag, std::string body) {
    auto& next = nextSeq[stream];
    uint64_t high = outbox[stream].empty() ? 0 : outbox[stream].rbegin()->first;
    if (next <= high) next = high + 1;  // heal a regressed counter
    uint64_t seq = next++;
    outbox[stream][seq] = OutTx{body, tag, {}};
    for (ProcessId j = 0; j < n; ++j) env.send(j, dataPacket(stream, seq, body));
    env.trace(TraceKind::UrbBroadcast, static_cast<int64_t>(stream), static_cast<int64_t>(seq),
              static_cast<int64_t>(tag), 0, fnv1a64(body));
    return TxDescriptor{self, stream, seq, tag};
  }

  /// Resend unacknowledged transmissions and re-offer messages whose origin
  /// crashed; prune transmissions that every trusted process acknowledged.
  void maintenance(Env& env) {
    const auto& tr = env.trusted();
    for (uint8_t stream = 0; stream < 2; ++stream) {
      auto& box = outbox[stream];
      for (auto& [seq, tx] : box) {
        for (ProcessId j : tr) {
          if (!tx.acked.count(j)) env.send(j, dataPacket(stream, seq, tx.body));
        }
      }
      // prune old terminated entries, keeping a short tail so the current
      // descriptor stays queryable
      std::vector<uint64_t> dead;
      int seen = 0;
      for (auto it = box.rbegin(); it != box.rend(); ++it) {
        if (terminated(it->second, tr) && ++seen > 8) dead.push_back(it->first);
      }
      for (uint64_t s : dead) box.erase(s);
    }
    relayFromCrashed(env);
  }

  bool knows(const TxDescriptor& txd) const {
    return txd.sender == self && txd.stream < 2 && outbox[txd.stream].count(txd.seq) > 0;
  }

  /// True iff every currently trusted process acknowledged the transmission.
  /// Unknown descriptors (stale post-corruption state) report false.
  bool hasTerminated(const TxDescriptor& txd, const std::vector<ProcessId>& trusted) const {
    if (!knows(txd)) return false;
    return terminated(outbox[txd.stream].at(txd.seq), trusted);
  }

  /// No in-flight application-stream transmissions from this process.
  bool allAppTerminated(const std::vector<ProcessId>& trusted) const {
    for (const auto& [seq, tx] : outbox[kAppStream]) {
      if (!terminated(tx, trusted)) return false;
    }
    return true;
  }

  // ---- receiver side ----

  void onAck(ProcessId from, uint8_t stream, uint64_t seq) {
    if (stream > 1) return;
    auto it = outbox[stream].find(seq);
    if (it != outbox[stream].end()) it->second.acked.insert(from);
  }

  /// Buffer one arrival and acknowledge it towards the origin. Returns the
  /// protocol-stream payloads that just became FIFO-ready, in order.
  std::vector<std::pair<ProcessId, std::string>> onData(Env& env, ProcessId origin,
                                                        uint8_t stream, uint64_t seq,
                                                        const std::string& body) {
    std::vector<std::pair<ProcessId, std::string>> ready;
    if (origin < 0 || origin >= n || stream > 1 || seq == 0) return ready;
    Packet ack;
    ack.kind = PacketKind::UrbAck;
    ack.origin = origin;
    ack.stream = stream;
    ack.seq = seq;
    env.send(origin, ack);

    auto& st = in[origin][stream];
    if (!st.buffer.count(seq)) {
      st.buffer[seq] = body;
      env.trace(TraceKind::UrbDeliver, origin, static_cast<int64_t>(stream),
                static_cast<int64_t>(seq), 0, fnv1a64(body));
    }
    if (stream == kProtoStream) {
      // protocol messages are consumed as soon as they are contiguous
      while (st.buffer.count(st.consumed + 1)) {
        ++st.consumed;
        ready.emplace_back(origin, st.buffer[st.consumed]);
      }
    }
    return ready;
  }

  // ---- readiness vectors over the application stream ----

  uint64_t contiguousHigh(ProcessId j) const {
    const auto& st = in[j][kAppStream];
    uint64_t high = st.consumed;
    while (st.buffer.count(high + 1)) ++high;
    return high;
  }

  ReadyVector readyMin() const {
    ReadyVector v(n);
    for (ProcessId j = 0; j < n; ++j) {
      uint64_t high = contiguousHigh(j);
      uint64_t consumed = in[j][kAppStream].consumed;
      v[j] = high > consumed ? consumed + 1 : high;
    }
    return v;
  }

  ReadyVector fifoReady() const {
    ReadyVector v(n);
    for (ProcessId j = 0; j < n; ++j) v[j] = contiguousHigh(j);
    return v;
  }

  /// Number of ready, not yet application-delivered messages.
  uint64_t pendingCount() const {
    uint64_t total = 0;
    for (ProcessId j = 0; j < n; ++j) {
      uint64_t high = contiguousHigh(j);
      uint64_t consumed = in[j][kAppStream].consumed;
      if (high > consumed) total += high - consumed;
    }
    return total;
  }

  /// Deterministically ordered batch: sender-major, then per-sender FIFO
  /// order. Entries of rMax beyond the ready band are clamped; consumed
  /// positions advance so no message is handed out twice.
  std::vector<std::tuple<ProcessId, uint64_t, std::string>> bulkRead(const ReadyVector& rMax) {
    std::vector<std::tuple<ProcessId, uint64_t, std::string>> out;
    for (ProcessId j = 0; j < n; ++j) {
      uint64_t want = j < static_cast<ProcessId>(rMax.size()) ? rMax[j] : 0;
      uint64_t hi = std::min(want, contiguousHigh(j));
      auto& st = in[j][kAppStream];
      for (uint64_t s = st.consumed + 1; s <= hi; ++s) out.emplace_back(j, s, st.buffer[s]);
      if (hi > st.consumed) st.consumed = hi;
    }
    return out;
  }

 private:
  Packet dataPacket(uint8_t stream, uint64_t seq, const std::string& body) const {
    Packet p;
    p.kind = PacketKind::UrbData;
    p.origin = self;
    p.stream = stream;
    p.seq = seq;
    p.body = body;
    return p;
  }

  static bool terminated(const OutTx& tx, const std::vector<ProcessId>& trusted) {
    for (ProcessId j : trusted) {
      if (!tx.acked.count(j)) return false;
    }
    return true;
  }

  // URB-termination's uniform clause: once the origin is gone, whoever holds
  // a copy keeps offering it so every correct process still delivers.
  void relayFromCrashed(Env& env) {
    const auto& tr = env.trusted();
    std::vector<bool> isTrusted(n, false);
    for (ProcessId j : tr) isTrusted[j] = true;
    for (ProcessId origin = 0; origin < n; ++origin) {
      if (origin == self || isTrusted[origin]) continue;
      for (uint8_t stream = 0; stream < 2; ++stream) {
        for (const auto& [seq, body] : in[origin][stream].buffer) {
          Packet p;
          p.kind = PacketKind::UrbData;
          p.origin = origin;
          p.stream = stream;
          p.seq = seq;
          p.body = body;
          for (ProcessId j : tr) {
            if (j != self) env.send(j, p);
          }
        }
      }
    }
  }
};

}  // namespace stabcon
