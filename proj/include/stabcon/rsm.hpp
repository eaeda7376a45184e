#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "stabcon/core.hpp"
#include "stabcon/to_urb.hpp"

namespace stabcon {

/// Demo automaton for replicated-state-machine emulation: a keyed counter
/// machine. Commands look like "key=delta"; anything else bumps a junk
/// counter. Snapshots are canonical bytes, so replica comparison is a plain
/// byte diff.
struct Automaton {
  std::map<std::string, uint64_t> counters;
  uint64_t applied = 0;

  void apply(const std::string& cmd) {
    auto eq = cmd.find('=');
    if (eq != std::string::npos && eq > 0) {
      uint64_t delta = 0;
      bool numeric = eq + 1 < cmd.size();
      for (size_t i = eq + 1; i < cmd.size(); ++i) {
        if (cmd[i] < '0' || cmd[i] > '9') { numeric = false; break; }
        delta = delta * 10 + static_cast<uint64_t>(cmd[i] - '0');
      }
      if (numeric) {
        counters[cmd.substr(0, eq)] += delta;
        ++applied;
        return;
      }
    }
    counters["<junk>"] += 1;
    ++applied;
  }

  std::string snapshot() const {
    std::string out;
    wire::put64(out, applied);
    wire::put32(out, static_cast<uint32_t>(counters.size()));
    for (const auto& [k, v] : counters) {
      wire::putBytes(out, k);
      wire::put64(out, v);
    }
    return out;
  }

  bool restore(std::string_view snap) {
    wire::Reader rd{snap};
    uint64_t ap = rd.get64();
    uint32_t cnt = rd.get32();
    if (!rd.ok || cnt > 100000) return false;
    std::map<std::string, uint64_t> fresh;
    for (uint32_t i = 0; i < cnt; ++i) {
      std::string k = rd.getBytes();
      uint64_t v = rd.get64();
      if (!rd.ok) return false;
      fresh[std::move(k)] = v;
    }
    if (!rd.done()) return false;
    applied = ap;
    counters = std::move(fresh);
    return true;
  }
};

inline std::string encodeStateReady(const std::string& snap, const ReadyVector& rv) {
  std::string out;
  wire::putBytes(out, snap);
  out += encodeReady(rv);
  return out;
}

inline bool decodeStateReady(std::string_view bytes, std::string& snap, ReadyVector& rv) {
  wire::Reader rd{bytes};
  snap = rd.getBytes();
  if (!rd.ok) return false;
  auto rest = decodeReady(bytes.substr(rd.pos));
  if (!rest) return false;
  rv = *rest;
  return true;
}

/// Replicated-state-machine emulation: the total-order pipeline with the
/// consensus value extended to carry the automaton state. Adopting the agreed
/// state before applying the batch overwrites any corrupted replica.
class RsmNode : public ToUrbNode {
 public:
  Automaton automaton;

  RsmNode(ProcessId id, int nodes, uint64_t d) : ToUrbNode(id, nodes, d) {}

  std::string getState() const { return automaton.snapshot(); }
  void setState(std::string_view snap) { automaton.restore(snap); }

 protected:
  Value buildProposalValue(const ReadyVector& allReady) override {
    return encodeStateReady(automaton.snapshot(), allReady);
  }

  void onDecidedSlot(Env& env, UrbNode& urb, uint64_t slotS, const Value& decided) override {
    std::string snap;
    ReadyVector rv;
    if (!decodeStateReady(decided, snap, rv)) return;
    automaton.restore(snap);
    for (auto& [origin, seq, payload] : urb.bulkRead(rv)) {
      automaton.apply(payload);
      delivered.push_back(DeliveryRecord{slotS, origin, seq, fnv1a64(payload), now});
      env.trace(TraceKind::ToDeliver, static_cast<int64_t>(slotS), origin,
                static_cast<int64_t>(seq), 0, fnv1a64(payload));
    }
    env.trace(TraceKind::RsmApply, static_cast<int64_t>(slotS), 0, 0, 0,
              fnv1a64(automaton.snapshot()));
  }
};

}  // namespace stabcon
