#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "stabcon/bin_consensus.hpp"
#include "stabcon/core.hpp"
#include "stabcon/env.hpp"
#include "stabcon/urb.hpp"

namespace stabcon {

constexpr uint64_t kMrtBcTag = 2;

/// The non-self-stabilizing reduction: one broadcast of the proposal, then an
/// unbounded sequence of binary consensus rounds. Round k asks whether
/// proposals[k mod n] is known; the first True decides. Used as a
/// differential oracle in clean runs and as the contrast case under state
/// corruption, where it loses liveness.
///
/// The while-loop is resumed one round per activation so that traversing a
/// corrupted prefix of the round space costs scheduler steps, matching the
/// primitive-access cost model. The harness caps executed rounds.
class MrtNode {
 public:
  int n = 0;
  ProcessId self = 0;
  std::vector<std::optional<Value>> proposals;
  uint64_t k = 0;  // round counter
  uint64_t roundsExecuted = 0;
  uint64_t roundBudget = 0;
  bool started = false;
  std::optional<Value> decidedValue;

  MrtNode() = default;
  MrtNode(ProcessId id, int nodes, uint64_t budget)
      : n(nodes), self(id), proposals(nodes), roundBudget(budget) {}

  /// Invoked once per process: reset locals and broadcast the proposal.
  void propose(Env& env, UrbNode& urb, const Value& v) {
    if (started) return;
    started = true;
    proposals.assign(n, std::nullopt);
    k = 0;
    Message m;
    m.kind = MsgKind::Proposal;
    m.tag = kMrtBcTag;
    m.value = v;
    urb.broadcast(env, kProtoStream, kMrtBcTag, encodeMessage(m));
    env.trace(TraceKind::MvPropose, static_cast<int64_t>(kMrtBcTag), 0, 0, 1, fnv1a64(v));
  }

  void onProposal(ProcessId from, const std::optional<Value>& v) {
    if (from < 0 || from >= n || !v.has_value()) return;
    proposals[from] = v;
  }

  bool stalled() const { return started && !decidedValue && roundsExecuted >= roundBudget; }

  /// Resume the round loop: invoke the current round's object if needed,
  /// advance past a False decision, or return the value on True.
  void step(Env& env, BcNode& bc) {
    if (!started || decidedValue.has_value() || stalled()) return;
    int idx = static_cast<int>(k % static_cast<uint64_t>(n));
    if (!bc.isActive(kMrtBcTag, boundedRound())) {
      bc.propose(env, kMrtBcTag, boundedRound(), proposals[idx].has_value(),
                 std::numeric_limits<int>::max());
      ++roundsExecuted;
      return;
    }
    auto r = bc.result(kMrtBcTag, boundedRound());
    if (!r.has_value()) return;  // decision still in flight
    if (*r == false) {
      ++k;
      ++roundsExecuted;
      return;
    }
    // decided True: blocking wait until the matching proposal arrived
    if (proposals[idx].has_value()) {
      decidedValue = proposals[idx];
      env.trace(TraceKind::MvDecide, static_cast<int64_t>(kMrtBcTag),
                static_cast<int64_t>(k), idx, 1, fnv1a64(*decidedValue));
    }
  }

  // The BcNode slot vector is index-addressed; huge corrupted round counters
  // are folded into a window so a poisoned k still burns rounds without
  // allocating the whole range.
  int boundedRound() const {
    uint64_t window = roundBudget * 4 + 16;
    return static_cast<int>(k % window);
  }
};

}  // namespace stabcon
