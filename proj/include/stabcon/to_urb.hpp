#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stabcon/bin_consensus.hpp"
#include "stabcon/core.hpp"
#include "stabcon/env.hpp"
#include "stabcon/mv_consensus.hpp"
#include "stabcon/urb.hpp"

namespace stabcon {

constexpr int kRingSize = 3;

inline std::string encodeReady(const ReadyVector& rv) {
  std::string out;
  wire::put32(out, static_cast<uint32_t>(rv.size()));
  for (uint64_t e : rv.r) wire::put64(out, e);
  return out;
}

inline std::optional<ReadyVector> decodeReady(std::string_view bytes) {
  wire::Reader rd{bytes};
  uint32_t cnt = rd.get32();
  if (!rd.ok || cnt > 1024) return std::nullopt;
  ReadyVector rv;
  rv.r.resize(cnt);
  for (uint32_t i = 0; i < cnt; ++i) rv.r[i] = rd.get64();
  if (!rd.done()) return std::nullopt;
  return rv;
}

/// One total-order delivery, as recorded per process.
struct DeliveryRecord {
  uint64_t slotSeq = 0;
  ProcessId origin = 0;
  uint64_t seq = 0;
  uint64_t payloadHash = 0;
  uint64_t step = 0;
};

/// Total-order uniform reliable broadcast over repeated multivalued
/// consensus.
///
/// A ring of three consensus objects is recycled by sequence number. Every
/// iteration scrubs inconsistent ring state, queries all trusted processes
/// for their readiness (SYNC / SYNCACK), and, once everyone reports the same
/// sequence number and there is something to deliver, agrees on a readiness
/// vector. Decided vectors are materialized with bulkRead, which is
/// deterministically ordered, so all correct processes deliver identical
/// batches.
class ToUrbNode {
 public:
  struct AckInfo {
    uint64_t seq = 0;
    uint64_t obsS = 0;
    ReadyVector ready;
  };

  int n = 0;
  ProcessId self = 0;
  uint64_t delta = 8;

  std::array<MvObject, kRingSize> cs;
  std::array<uint64_t, kRingSize> slotSeq{};  // seq of each active ring slot
  uint64_t obsS = 0;  // highest obsolete sequence number
  uint64_t sn = 0;    // query number

  enum class Phase : uint8_t { Start, Collect } phase = Phase::Start;
  std::map<ProcessId, AckInfo> acks;

  // outcome of the last completed aggregation, for the quiescence predicate
  std::optional<uint64_t> lastMaxSeq;
  std::set<uint64_t> lastAllSeq;

  std::vector<DeliveryRecord> delivered;
  uint64_t iterationsCompleted = 0;
  uint64_t now = 0;  // harness step stamp for delivery records

  ToUrbNode() = default;
  ToUrbNode(ProcessId id, int nodes, uint64_t d) : n(nodes), self(id), delta(d) {}
  virtual ~ToUrbNode() = default;

  // ---- macros ----

  std::set<uint64_t> sSet() const {
    std::set<uint64_t> s;
    for (int k = 0; k < kRingSize; ++k) {
      if (cs[k].active) s.insert(slotSeq[k]);
    }
    return s;
  }

  uint64_t getSeq() const {
    uint64_t best = obsS;
    for (int k = 0; k < kRingSize; ++k) {
      if (cs[k].active && slotSeq[k] > best) best = slotSeq[k];
    }
    return best;
  }

  bool checkSeq(uint64_t s) const {
    if (s == getSeq() + 1) return true;
    for (int k = 0; k < kRingSize; ++k) {
      if (cs[k].active && slotSeq[k] == s) return true;
    }
    return false;
  }

  /// Delivery is forced once no own application transmission is in flight
  /// and something is pending, or once the pending count reaches delta.
  bool exceed(const UrbNode& urb, const std::vector<ProcessId>& trusted) const {
    uint64_t pending = urb.pendingCount();
    return (urb.allAppTerminated(trusted) && pending > 0) || pending >= delta;
  }

  // ---- operations ----

  void toBroadcast(Env& env, UrbNode& urb, const Value& m) {
    urb.broadcast(env, kAppStream, 0, m);
    env.trace(TraceKind::ToBroadcast, 0, 0, 0, 0, fnv1a64(m));
  }

  void onSync(Env& env, UrbNode& urb, ProcessId from, uint64_t snJ) {
    Packet p;
    p.kind = PacketKind::Direct;
    p.msg.kind = MsgKind::SyncAck;
    p.msg.sender = self;
    p.msg.dest = from;
    p.msg.sn = snJ;
    p.msg.seq = getSeq();
    p.msg.obsS = obsS;
    p.msg.ready = urb.fifoReady();
    env.send(from, p);
    env.trace(TraceKind::Sync, from, static_cast<int64_t>(snJ));
  }

  void onSyncAck(Env& env, ProcessId from, uint64_t snJ, uint64_t seqJ, uint64_t obsJ,
                 const ReadyVector& readyJ) {
    if (snJ != sn) return;  // stale replies are dropped
    acks[from] = AckInfo{seqJ, obsJ, readyJ};
    env.trace(TraceKind::SyncAck, from, static_cast<int64_t>(snJ), static_cast<int64_t>(seqJ),
              static_cast<int64_t>(obsJ));
  }

  /// Route one PROPOSAL envelope to its ring slot. Inconsistent sequence
  /// numbers are ignored; a fresh consistent one activates the slot, but only
  /// while the activation keeps the sequence window at width one.
  void onProposalEnvelope(BcNode& bc, uint64_t s, ProcessId from, const std::optional<Value>& v) {
    int idx = static_cast<int>(s % kRingSize);
    if (cs[idx].active && slotSeq[idx] == s) {
      mvOnProposal(cs[idx], bc, n, s, from, v);
      return;
    }
    if (!cs[idx].active && checkSeq(s)) {
      auto live = sSet();
      if (!live.empty() && (s < *live.begin() || s - *live.begin() > 1)) return;
      mvOnProposal(cs[idx], bc, n, s, from, v);
      if (cs[idx].active) slotSeq[idx] = s;
    }
  }

  /// One do-forever activation: service the ring's consensus objects, then
  /// run the query/agree/deliver pipeline one phase at a time.
  void activation(Env& env, UrbNode& urb, BcNode& bc, Variant variant, int rebroadcastPeriod) {
    for (int k = 0; k < kRingSize; ++k) {
      if (cs[k].active) mvDoForever(cs[k], bc, urb, env, variant, n, rebroadcastPeriod);
    }
    bc.upkeep(env);

    if (phase == Phase::Start) {
      scrub(bc);
      ++sn;
      acks.clear();
      sendSyncToAll(env);
      phase = Phase::Collect;
      return;
    }

    const auto& tr = env.trusted();
    bool complete = true;
    for (ProcessId j : tr) {
      if (!acks.count(j)) complete = false;
    }
    if (!complete) {
      sendSyncToAll(env);  // keep querying until every trusted process replied
      return;
    }

    // (3) aggregate the replies
    ReadyVector allReady(n);
    bool first = true;
    uint64_t maxSeq = 0;
    std::set<uint64_t> allSeq;
    for (const auto& [j, info] : acks) {
      if (first) {
        allReady = info.ready;
        if (allReady.size() < static_cast<size_t>(n)) allReady.r.resize(n, 0);
        first = false;
      } else {
        allReady.minWith(info.ready);
      }
      maxSeq = std::max(maxSeq, info.seq);
      allSeq.insert(info.seq);
      allSeq.insert(info.obsS);
    }
    lastMaxSeq = maxSeq;
    lastAllSeq = allSeq;

    // (4) obsS / getSeq / maxSeq must follow one of the three legal patterns
    {
      uint64_t x = obsS, y = getSeq(), z = maxSeq;
      bool okPattern = (x + 1 == y && y == z) || (x == y && y == z) || (x == y && y + 1 == z);
      if (!okPattern) obsS = std::max({x, y, z});
    }

    // (5) recycle every slot outside the live window
    recycleOutsideWindow(bc, allSeq.size() == 1, maxSeq);

    // (6) propose the aggregated readiness vector on the next slot
    if (allSeq.size() == 1 && exceed(urb, tr)) {
      uint64_t s = maxSeq + 1;
      int idx = static_cast<int>(s % kRingSize);
      if (cs[idx].active && slotSeq[idx] != s) deactivateSlot(bc, idx);
      if (!cs[idx].active) {
        if (mvPropose(cs[idx], bc, n, s, buildProposalValue(allReady))) {
          slotSeq[idx] = s;
          env.trace(TraceKind::CsPropose, static_cast<int64_t>(s), idx);
        }
      }
    }

    // (7) deliver the next slot's batch once it decided; advance even on a
    // transient error so the slot can be recycled
    if (obsS + 1 == getSeq()) {
      int idx = static_cast<int>((obsS + 1) % kRingSize);
      if (cs[idx].active) {
        ConsensusResult r = mvResult(cs[idx], bc, n);
        if (!r.isBot()) {
          env.trace(TraceKind::CsDecide, static_cast<int64_t>(slotSeq[idx]), idx,
                    r.isError() ? 1 : 0);
          if (r.isDecided()) onDecidedSlot(env, urb, slotSeq[idx], r.value);
          obsS += 1;
        }
      }
    }

    ++iterationsCompleted;
    phase = Phase::Start;
  }

  bool def4StateInvariants() const {
    for (int k = 0; k < kRingSize; ++k) {
      if (cs[k].active && slotSeq[k] % kRingSize != static_cast<uint64_t>(k)) return false;
    }
    auto s = sSet();
    if (!s.empty()) {
      if (obsS > *s.rbegin()) return false;
      if (*s.rbegin() - *s.begin() > 1) return false;
    }
    uint64_t g = getSeq();
    return obsS <= g && g <= obsS + 1;
  }

  int activeSlots() const {
    int c = 0;
    for (int k = 0; k < kRingSize; ++k) {
      if (cs[k].active) ++c;
    }
    return c;
  }

 protected:
  /// What goes into the consensus value. The base protocol agrees on the
  /// readiness vector alone.
  virtual Value buildProposalValue(const ReadyVector& allReady) { return encodeReady(allReady); }

  /// Materialize a decided slot. The base protocol bulk-reads the agreed
  /// vector and delivers the batch in its deterministic order.
  virtual void onDecidedSlot(Env& env, UrbNode& urb, uint64_t slotS, const Value& decided) {
    auto rv = decodeReady(decided);
    if (!rv) return;  // corrupted agreed value: skip the batch, slot recycles
    for (auto& [origin, seq, payload] : urb.bulkRead(*rv)) {
      delivered.push_back(DeliveryRecord{slotS, origin, seq, fnv1a64(payload), now});
      env.trace(TraceKind::ToDeliver, static_cast<int64_t>(slotS), origin,
                static_cast<int64_t>(seq), 0, fnv1a64(payload));
    }
  }

  void deactivateSlot(BcNode& bc, int k) {
    bc.dropTag(cs[k].objectTag);
    cs[k] = MvObject{};
    slotSeq[k] = 0;
  }

 private:
  // (1) reset the whole ring when any slot sits at the wrong index or the
  // sequence window is torn
  void scrub(BcNode& bc) {
    bool bad = false;
    for (int k = 0; k < kRingSize; ++k) {
      if (cs[k].active && slotSeq[k] % kRingSize != static_cast<uint64_t>(k)) bad = true;
    }
    auto s = sSet();
    if (!s.empty() && (obsS > *s.rbegin() || *s.rbegin() - *s.begin() > 1)) bad = true;
    if (bad) {
      for (int k = 0; k < kRingSize; ++k) deactivateSlot(bc, k);
    }
  }

  void sendSyncToAll(Env& env) {
    for (ProcessId j = 0; j < n; ++j) {
      Packet p;
      p.kind = PacketKind::Direct;
      p.msg.kind = MsgKind::Sync;
      p.msg.sender = self;
      p.msg.dest = j;
      p.msg.sn = sn;
      env.send(j, p);
    }
  }
};

}  // namespace stabcon
