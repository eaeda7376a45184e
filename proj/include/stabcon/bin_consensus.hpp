#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "stabcon/core.hpp"
#include "stabcon/env.hpp"

namespace stabcon {

/// One binary consensus slot as seen locally: inactive, or active with the
/// process's own proposal and the (eventually immutable) decision.
struct BcObject {
  bool active = false;
  bool myProposal = false;
  std::optional<bool> decided;
};

/// Per-process cache over the simulator's binary-consensus decision ledger.
///
/// The ledger models the external service's own self-stabilization and is
/// never corrupted; this cache is ordinary local state and can be. In
/// authentic executions the two never diverge.
class BcNode {
 public:
  ProcessId self = 0;
  std::map<uint64_t, std::vector<BcObject>> tags;

  BcNode() = default;
  explicit BcNode(ProcessId id) : self(id) {}

  /// Activate slot k of the given object and submit the proposal. Re-invoking
  /// an active slot is a no-op. Returns false when k is out of range, which
  /// signals caller state corruption.
  bool propose(Env& env, uint64_t tag, int k, bool b, int maxK) {
    if (k < 0 || k >= maxK) return false;
    auto& slots = tags[tag];
    if (static_cast<int>(slots.size()) <= k) slots.resize(k + 1);
    if (slots[k].active) return true;
    slots[k] = BcObject{true, b, std::nullopt};
    env.trace(TraceKind::BcPropose, static_cast<int64_t>(tag), k, b ? 1 : 0);
    env.bcSubmit(BcSubmission{tag, {{k, b}}, false});
    return true;
  }

  /// Activate every listed slot and submit all proposals in one event
  /// (piggybacked concurrent invocation).
  void batchPropose(Env& env, uint64_t tag, const std::vector<std::pair<int, bool>>& entries) {
    auto& slots = tags[tag];
    BcSubmission sub{tag, {}, false};
    for (auto [k, b] : entries) {
      if (k < 0) continue;
      if (static_cast<int>(slots.size()) <= k) slots.resize(k + 1);
      if (slots[k].active) continue;
      slots[k] = BcObject{true, b, std::nullopt};
      env.trace(TraceKind::BcPropose, static_cast<int64_t>(tag), k, b ? 1 : 0);
      sub.entries.emplace_back(k, b);
    }
    if (!sub.entries.empty()) env.bcSubmit(std::move(sub));
  }

  bool isActive(uint64_t tag, int k) const {
    auto it = tags.find(tag);
    if (it == tags.end() || k < 0 || k >= static_cast<int>(it->second.size())) return false;
    return it->second[k].active;
  }

  /// Bot before the decision reaches this process, the decided boolean after.
  std::optional<bool> result(uint64_t tag, int k) const {
    auto it = tags.find(tag);
    if (it == tags.end() || k < 0 || k >= static_cast<int>(it->second.size())) return std::nullopt;
    const BcObject& o = it->second[k];
    if (!o.active) return std::nullopt;
    return o.decided;
  }

  void onDecide(Env& env, uint64_t tag, int k, bool v) {
    auto it = tags.find(tag);
    if (it == tags.end() || k < 0 || k >= static_cast<int>(it->second.size())) return;
    BcObject& o = it->second[k];
    if (!o.active || o.decided.has_value()) return;  // local results are write-once
    o.decided = v;
    env.trace(TraceKind::BcDecide, static_cast<int64_t>(tag), k, v ? 1 : 0);
  }

  /// Re-submit every active undecided slot. This is the service's stabilizing
  /// retransmission: a slot that became active through state corruption still
  /// reaches a decision.
  void upkeep(Env& env) {
    for (auto& [tag, slots] : tags) {
      BcSubmission sub{tag, {}, true};
      for (int k = 0; k < static_cast<int>(slots.size()); ++k) {
        if (slots[k].active && !slots[k].decided) sub.entries.emplace_back(k, slots[k].myProposal);
      }
      if (!sub.entries.empty()) env.bcSubmit(std::move(sub));
    }
  }

  void resetTag(uint64_t tag, int slots) { tags[tag].assign(slots, BcObject{}); }
  void dropTag(uint64_t tag) { tags.erase(tag); }

  /// Fault-injection hook: overwrite one slot verbatim.
  void corrupt(uint64_t tag, int k, const BcObject& forced) {
    if (k < 0) return;
    auto& slots = tags[tag];
    if (static_cast<int>(slots.size()) <= k) slots.resize(k + 1);
    slots[k] = forced;
  }
};

}  // namespace stabcon
