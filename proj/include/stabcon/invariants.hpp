#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stabcon/simulator.hpp"

namespace stabcon {

struct CheckOutcome {
  bool pass = true;
  std::string witness;

  static CheckOutcome ok() { return {}; }
  static CheckOutcome fail(std::string w) { return {false, std::move(w)}; }
};

// ---------------------------------------------------------------------------
// Definition-1 checks over a finished run (authentic executions)
// ---------------------------------------------------------------------------

/// No two correct processes decided different values.
inline CheckOutcome checkAgreement(const World& w) {
  std::optional<Value> seen;
  for (ProcessId i : w.correctSet()) {
    const ResultHistory& h = w.histories[i];
    if (!h.decidedEver) continue;
    if (!seen) {
      seen = h.firstDecided.value;
    } else if (*seen != h.firstDecided.value) {
      return CheckOutcome::fail("processes decided \"" + *seen + "\" and \"" +
                                h.firstDecided.value + "\"");
    }
  }
  return CheckOutcome::ok();
}

/// Every decided value was proposed by somebody.
inline CheckOutcome checkValidity(const World& w) {
  for (ProcessId i = 0; i < w.cfg.n; ++i) {
    const ResultHistory& h = w.histories[i];
    if (!h.decidedEver) continue;
    bool found = false;
    for (const Value& v : w.proposalLog) {
      if (v == h.firstDecided.value) found = true;
    }
    if (!found) {
      return CheckOutcome::fail("p" + std::to_string(i) + " decided unproposed value");
    }
  }
  return CheckOutcome::ok();
}

/// Once a process observed a decision, every later result() repeats it.
inline CheckOutcome checkIntegrity(const World& w) {
  for (ProcessId i = 0; i < w.cfg.n; ++i) {
    if (w.histories[i].unstable) {
      return CheckOutcome::fail("p" + std::to_string(i) + " changed its decision");
    }
  }
  return CheckOutcome::ok();
}

/// All correct processes decided within the run.
inline CheckOutcome checkTermination(const World& w) {
  for (ProcessId i : w.correctSet()) {
    if (!w.histories[i].decidedEver) {
      return CheckOutcome::fail("p" + std::to_string(i) + " never decided");
    }
  }
  return CheckOutcome::ok();
}

/// Per-object bound: at most n binary-consensus invocations.
inline CheckOutcome checkBcBound(const World& w) {
  for (const auto& [key, count] : w.metrics.bcInvocationsPerObject) {
    if (count > static_cast<uint64_t>(w.cfg.n)) {
      return CheckOutcome::fail("p" + std::to_string(key.first) + " object " +
                                std::to_string(key.second) + " used " + std::to_string(count) +
                                " invocations");
    }
  }
  return CheckOutcome::ok();
}

// ---------------------------------------------------------------------------
// Consistency predicates
// ---------------------------------------------------------------------------

/// Consistent multivalued object: inactive, or holding a value with the
/// reduction able to move forward (or already decided through a matching
/// proposal).
inline bool checkDef2Consistent(const MvObject& o, const BcNode& bc, int n) {
  if (!o.active) return true;
  int k = kMacro(o, bc, n);
  if (!o.v.has_value() || k >= n - 1) return false;
  if (!bc.isActive(o.objectTag, k + 1)) return true;
  auto r = bc.result(o.objectTag, k + 1);
  if (!r.has_value()) return true;
  return *r == true && static_cast<int>(o.proposals.size()) > k + 1 &&
         o.proposals[k + 1].has_value();
}

/// Ring-state legality plus the in-flight query-number dominance clause.
inline bool checkDef4Legal(const World& w) {
  for (ProcessId i : w.correctSet()) {
    const auto& p = w.procs[i];
    if (!p.tour) return false;
    if (!p.tour->def4StateInvariants()) return false;
  }
  for (const Event& ev : w.queue) {
    if (ev.cancelled || ev.type != Event::Type::Deliver) continue;
    if (ev.packet.kind != PacketKind::Direct) continue;
    const Message& m = ev.packet.msg;
    if (m.kind == MsgKind::Sync && ev.src >= 0 && ev.src < w.cfg.n && !w.isCrashed(ev.src)) {
      if (m.sn > w.procs[ev.src].tour->sn) return false;
    }
    if (m.kind == MsgKind::SyncAck && ev.dst >= 0 && ev.dst < w.cfg.n && !w.isCrashed(ev.dst)) {
      if (m.sn > w.procs[ev.dst].tour->sn) return false;
    }
  }
  return true;
}

/// The quiescence predicate: some z with getSeq = maxSeq = obsS = z and
/// allSeq = {z} at every correct process.
inline bool checkPred(const World& w) {
  std::optional<uint64_t> z;
  for (ProcessId i : w.correctSet()) {
    const auto& t = w.procs[i].tour;
    if (!t || !t->lastMaxSeq) return false;
    uint64_t zi = *t->lastMaxSeq;
    if (t->getSeq() != zi || t->obsS != zi) return false;
    if (t->lastAllSeq != std::set<uint64_t>{zi}) return false;
    if (z && *z != zi) return false;
    z = zi;
  }
  return z.has_value();
}

// ---------------------------------------------------------------------------
// Total order
// ---------------------------------------------------------------------------

/// Pairwise prefix comparability of delivery logs, with the per-sender FIFO
/// subcheck. Logs are sequences of (origin, seq, payloadHash).
inline CheckOutcome checkTotalOrder(const std::vector<std::vector<DeliveryRecord>>& logs) {
  for (size_t a = 0; a < logs.size(); ++a) {
    for (size_t b = a + 1; b < logs.size(); ++b) {
      size_t m = std::min(logs[a].size(), logs[b].size());
      for (size_t i = 0; i < m; ++i) {
        const DeliveryRecord& x = logs[a][i];
        const DeliveryRecord& y = logs[b][i];
        if (x.origin != y.origin || x.seq != y.seq || x.payloadHash != y.payloadHash) {
          return CheckOutcome::fail("logs " + std::to_string(a) + " and " + std::to_string(b) +
                                    " diverge at position " + std::to_string(i));
        }
      }
    }
  }
  for (size_t a = 0; a < logs.size(); ++a) {
    std::map<ProcessId, uint64_t> lastSeq;
    for (const DeliveryRecord& r : logs[a]) {
      auto it = lastSeq.find(r.origin);
      if (it != lastSeq.end() && r.seq <= it->second) {
        return CheckOutcome::fail("log " + std::to_string(a) + " breaks FIFO for sender " +
                                  std::to_string(r.origin));
      }
      lastSeq[r.origin] = r.seq;
    }
  }
  return CheckOutcome::ok();
}

/// No delivery is spontaneous (matches a broadcast payload) and no (origin,
/// seq) is delivered twice at the same process.
inline CheckOutcome checkDeliveryValidityIntegrity(const World& w) {
  std::set<uint64_t> broadcastHashes;
  for (const auto& [origin, step, payload] : w.appBroadcastLog) {
    broadcastHashes.insert(fnv1a64(payload));
  }
  for (ProcessId i : w.correctSet()) {
    std::set<std::pair<ProcessId, uint64_t>> seen;
    for (const DeliveryRecord& r : w.procs[i].tour->delivered) {
      if (!broadcastHashes.count(r.payloadHash)) {
        return CheckOutcome::fail("p" + std::to_string(i) + " delivered a payload never broadcast");
      }
      if (!seen.insert({r.origin, r.seq}).second) {
        return CheckOutcome::fail("p" + std::to_string(i) + " delivered (" +
                                  std::to_string(r.origin) + "," + std::to_string(r.seq) +
                                  ") twice");
      }
    }
  }
  return CheckOutcome::ok();
}

}  // namespace stabcon
