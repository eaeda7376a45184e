#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stabcon/bin_consensus.hpp"
#include "stabcon/core.hpp"
#include "stabcon/env.hpp"
#include "stabcon/urb.hpp"

namespace stabcon {

enum class Variant : uint8_t { Sequential, Concurrent };

/// Self-stabilizing wait-free multivalued consensus object.
///
/// The object reduces agreement on an opaque value to an array of n binary
/// consensus slots: slot k decides whether proposals[k] is the value. No
/// binary slot is touched before at least one broadcast of the local estimate
/// has terminated, which bounds the whole reduction to n slots.
struct MvObject {
  bool active = false;
  uint64_t objectTag = 0;
  std::optional<Value> v;                        // local decision estimate
  std::vector<std::optional<Value>> proposals;   // arriving proposals, write-once
  std::optional<TxDescriptor> txD;               // current broadcast descriptor
  bool oneTerm = false;                          // some broadcast of v terminated
  uint64_t rebroadcasts = 0;
};

/// Largest k such that slots 0..k all decided False locally; -1 when slot 0
/// has not.
inline int kMacro(const MvObject& o, const BcNode& bc, int n) {
  int k = -1;
  for (int x = 0; x < n; ++x) {
    auto r = bc.result(o.objectTag, x);
    if (r.has_value() && *r == false) {
      k = x;
    } else {
      break;
    }
  }
  return k;
}

/// Activate an inactive object with the caller's own value. Misuse (active
/// object, Bot value) is a guarded no-op.
inline bool mvPropose(MvObject& o, BcNode& bc, int n, uint64_t tag,
                      const std::optional<Value>& v) {
  if (!v.has_value() || o.active) return false;
  o.active = true;
  o.objectTag = tag;
  o.v = v;
  o.proposals.assign(n, std::nullopt);
  o.txD.reset();
  o.oneTerm = false;
  o.rebroadcasts = 0;
  bc.resetTag(tag, n);
  return true;
}

/// The four-branch result cascade. TransientError reports detected
/// inconsistencies in-band.
inline ConsensusResult mvResult(const MvObject& o, const BcNode& bc, int n) {
  if (!o.active) return ConsensusResult::bot();
  int k = kMacro(o, bc, n);
  if (!o.v.has_value() || k >= n - 1) return ConsensusResult::transientError();
  auto next = bc.result(o.objectTag, k + 1);
  // a decided False at k+1 is unreachable through kMacro; a corrupted cache
  // can still present it momentarily, in which case we stay at Bot
  if (!next.has_value() || *next != true) return ConsensusResult::bot();
  if (static_cast<int>(o.proposals.size()) <= k + 1 || !o.proposals[k + 1].has_value()) {
    return ConsensusResult::transientError();
  }
  return ConsensusResult::decided(*o.proposals[k + 1]);
}

/// Delivery handler for PROPOSAL envelopes. A Bot payload is ignored; an
/// inactive object is activated with the sender's value.
inline void mvOnProposal(MvObject& o, BcNode& bc, int n, uint64_t tag, ProcessId from,
                         const std::optional<Value>& vJ) {
  if (!vJ.has_value() || from < 0 || from >= n) return;
  if (o.active) {
    if (static_cast<int>(o.proposals.size()) < n) o.proposals.resize(n);
    if (!o.proposals[from].has_value()) o.proposals[from] = vJ;
    return;
  }
  o.active = true;
  o.objectTag = tag;
  o.v = vJ;
  o.proposals.assign(n, std::nullopt);
  o.proposals[from] = vJ;
  o.txD.reset();
  o.oneTerm = false;  // a receiver-activated object has completed no broadcast
  o.rebroadcasts = 0;
  bc.resetTag(tag, n);
}

inline std::string proposalBody(const MvObject& o) {
  Message m;
  m.kind = MsgKind::Proposal;
  m.sender = -1;  // receivers identify the proposer from the URB origin
  m.dest = -1;
  m.tag = o.objectTag;
  m.value = o.v;
  return encodeMessage(m);
}

/// One do-forever body: rebroadcast the estimate while the object lives, then
/// invoke binary consensus per the chosen variant once a broadcast terminated.
/// `rebroadcastPeriod` trades repetition rate against recovery speed.
inline void mvDoForever(MvObject& o, BcNode& bc, UrbNode& urb, Env& env, Variant variant, int n,
                        int rebroadcastPeriod) {
  if (!o.active) return;

  // A descriptor the URB layer does not track is stale corruption; reset it
  // so the rebroadcast path can make progress again.
  if (o.txD && !urb.knows(*o.txD)) o.txD.reset();

  if (o.v.has_value()) {
    bool term = o.txD && urb.hasTerminated(*o.txD, env.trusted());
    if (!o.txD || term) {
      o.oneTerm = o.oneTerm || term;
      bool due = !o.txD || rebroadcastPeriod <= 1 || (o.rebroadcasts % rebroadcastPeriod) == 0;
      if (due) o.txD = urb.broadcast(env, kProtoStream, o.objectTag, proposalBody(o));
      ++o.rebroadcasts;
    }
  }

  if (variant == Variant::Sequential) {
    int k = kMacro(o, bc, n);
    bool prevDone = k == -1 || bc.result(o.objectTag, k).has_value();
    if (o.oneTerm && k < n - 1 && !bc.isActive(o.objectTag, k + 1) && prevDone) {
      bool b = static_cast<int>(o.proposals.size()) > k + 1 && o.proposals[k + 1].has_value();
      env.trace(TraceKind::MvBcInvoke, static_cast<int64_t>(o.objectTag), k + 1, b ? 1 : 0);
      if (!bc.propose(env, o.objectTag, k + 1, b, n)) {
        o.active = false;  // out-of-range index: deactivate on detected corruption
      }
    }
  } else {
    bool anyInactive = false;
    for (int k = 0; k < n; ++k) {
      if (!bc.isActive(o.objectTag, k)) anyInactive = true;
    }
    if (o.oneTerm && anyInactive) {
      std::vector<std::pair<int, bool>> batch;
      for (int k = 0; k < n; ++k) {
        if (!bc.isActive(o.objectTag, k)) {
          bool b = static_cast<int>(o.proposals.size()) > k && o.proposals[k].has_value();
          batch.emplace_back(k, b);
          env.trace(TraceKind::MvBcInvoke, static_cast<int64_t>(o.objectTag), k, b ? 1 : 0);
        }
      }
      bc.batchPropose(env, o.objectTag, batch);
    }
  }
}

/// Partial overwrite of an object's fields for fault injection. Unset fields
/// are left alone; an empty recipe is an identity.
struct MvCorruption {
  std::optional<bool> active;
  std::optional<std::optional<Value>> v;
  std::optional<bool> oneTerm;
  std::optional<std::optional<TxDescriptor>> txD;
  std::map<int, std::optional<Value>> proposals;
};

inline void corruptMv(MvObject& o, const MvCorruption& c) {
  if (c.active) o.active = *c.active;
  if (c.v) o.v = *c.v;
  if (c.oneTerm) o.oneTerm = *c.oneTerm;
  if (c.txD) o.txD = *c.txD;
  for (const auto& [idx, val] : c.proposals) {
    if (idx >= 0 && idx < static_cast<int>(o.proposals.size())) o.proposals[idx] = val;
  }
}

}  // namespace stabcon
