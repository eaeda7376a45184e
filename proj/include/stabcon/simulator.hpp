#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "stabcon/bin_consensus.hpp"
#include "stabcon/core.hpp"
#include "stabcon/env.hpp"
#include "stabcon/mrt.hpp"
#include "stabcon/mv_consensus.hpp"
#include "stabcon/rsm.hpp"
#include "stabcon/to_urb.hpp"
#include "stabcon/trace.hpp"
#include "stabcon/urb.hpp"

namespace stabcon {

constexpr uint64_t kMvTag = 1;

enum class Scenario : uint8_t { Mv, Mrt, ToUrb, Rsm };

struct TransientRecipe {
  std::string kind = "none";
  uint64_t at = 0;
  uint64_t depth = 0;  // round depth for baseline corruption; 0 = derived default
};

struct FaultSchedule {
  std::map<ProcessId, uint64_t> crashSteps;
  double dropProb = 0.0;
  double dupProb = 0.0;
  bool reorder = false;
  int forcedDeliveryPeriod = 4;  // with dropProb=1, every F-th copy gets through
  int detectionDelay = 0;        // steps a crash stays invisible to the detector
  TransientRecipe transient;
};

struct Config {
  int n = 3;
  int t = 1;
  uint64_t seed = 1;
  Scenario scenario = Scenario::Mv;
  Variant variant = Variant::Sequential;
  uint64_t delta = 8;
  uint64_t budget = 4000;
  int channelCapacity = 64;
  int rebroadcastPeriod = 1;
  int appBroadcasts = 0;        // to_urb / rsm payload count
  uint64_t broadcastWindow = 0; // steps over which payloads are spread; 0 = budget/2
  uint64_t cutoff = 0;          // no application broadcasts at or after this step
  uint64_t mrtRoundBudget = 0;  // 0 = 64 * n
  FaultSchedule faults;
  std::string traceFile;
};

struct Event {
  enum class Type : uint8_t { Activate, Deliver, BcSubmit, BcNotify };
  Type type = Type::Activate;
  ProcessId pid = -1;  // Activate target, BcSubmit submitter, BcNotify target
  ProcessId src = -1;
  ProcessId dst = -1;
  Packet packet;
  uint64_t tag = 0;
  std::vector<std::pair<int, bool>> entries;
  int k = 0;
  bool decision = false;
  bool cancelled = false;
};

struct Metrics {
  uint64_t messagesSent = 0;
  uint64_t messagesDelivered = 0;
  uint64_t messagesDropped = 0;
  uint64_t overflowDrops = 0;
  uint64_t duplicates = 0;
  uint64_t urbBroadcasts = 0;
  uint64_t bcInvocationsTotal = 0;
  std::map<std::pair<ProcessId, uint64_t>, uint64_t> bcInvocationsPerObject;
  std::map<std::pair<ProcessId, uint64_t>, std::set<uint64_t>> bcSubmitSteps;
};

/// Per-process observation of the result() stream, polled every activation.
struct ResultHistory {
  ConsensusResult last;
  bool leftBot = false;
  uint64_t stepLeftBot = 0;
  bool decidedEver = false;
  ConsensusResult firstDecided;
  bool unstable = false;  // result changed after a decision was observed
  bool errorEver = false;
};

/// Deterministic discrete-event world: one event per step, seeded fault
/// lottery on every send, bounded channels, a perfect failure-detector
/// oracle, and an uncorruptible binary-consensus decision ledger.
class World {
 public:
  Config cfg;
  std::mt19937_64 rng;
  uint64_t clock = 0;
  std::deque<Event> queue;
  std::map<std::pair<uint64_t, int>, bool> ledger;
  TraceSink trace;
  Metrics metrics;

  struct Proc {
    UrbNode urb;
    BcNode bc;
    MvObject mv;
    MrtNode mrt;
    std::unique_ptr<ToUrbNode> tour;
    uint64_t activations = 0;
    std::optional<Value> proposeValue;  // consumed at the first activation
    std::deque<std::pair<uint64_t, Value>> pendingBroadcasts;
  };

  std::vector<Proc> procs;
  std::vector<uint64_t> crashedAt;  // UINT64_MAX while alive
  std::vector<ResultHistory> histories;
  std::vector<Value> proposalLog;  // ground truth for validity checks
  std::vector<std::tuple<ProcessId, uint64_t, Value>> appBroadcastLog;  // (origin, step, payload)

  uint64_t cycles = 0;
  uint64_t cyclesAtInjection = 0;
  bool injected = false;
  bool authentic = true;

  explicit World(Config c) : cfg(std::move(c)), rng(cfg.seed) {
    if (cfg.mrtRoundBudget == 0) cfg.mrtRoundBudget = 64ull * cfg.n;
    if (cfg.broadcastWindow == 0) cfg.broadcastWindow = cfg.budget / 2;
    if (!cfg.traceFile.empty()) trace.openFile(cfg.traceFile);
    procs.resize(cfg.n);
    crashedAt.assign(cfg.n, UINT64_MAX);
    histories.resize(cfg.n);
    cycleMark_.assign(cfg.n, 0);
    dropRun_.assign(cfg.n, std::vector<int>(cfg.n, 0));
    channelLoad_.assign(cfg.n, std::vector<int>(cfg.n, 0));
    for (ProcessId i = 0; i < cfg.n; ++i) {
      auto& p = procs[i];
      p.urb = UrbNode(i, cfg.n);
      p.bc = BcNode(i);
      if (cfg.scenario == Scenario::Mrt) p.mrt = MrtNode(i, cfg.n, cfg.mrtRoundBudget);
      if (cfg.scenario == Scenario::ToUrb) p.tour = std::make_unique<ToUrbNode>(i, cfg.n, cfg.delta);
      if (cfg.scenario == Scenario::Rsm) p.tour = std::make_unique<RsmNode>(i, cfg.n, cfg.delta);
      queue.push_back(activateEvent(i));
    }
  }

  // ---- randomness helpers (all draws go through the world RNG) ----

  uint64_t randomU64() { return rng(); }
  uint64_t randomBelow(uint64_t n) { return n == 0 ? 0 : rng() % n; }
  bool chance(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return (rng() >> 11) * 0x1.0p-53 < p;
  }

  // ---- oracle ----

  bool isCrashed(ProcessId i) const { return crashedAt[i] != UINT64_MAX; }

  /// Perfect failure detector: exactly the live processes, optionally with a
  /// configured detection delay.
  const std::vector<ProcessId>& trustedOracle() {
    trustedScratch_.clear();
    for (ProcessId j = 0; j < cfg.n; ++j) {
      if (!isCrashed(j)) {
        trustedScratch_.push_back(j);
      } else if (cfg.faults.detectionDelay > 0 &&
                 clock < crashedAt[j] + static_cast<uint64_t>(cfg.faults.detectionDelay)) {
        trustedScratch_.push_back(j);
      }
    }
    return trustedScratch_;
  }

  std::vector<ProcessId> correctSet() const {
    std::vector<ProcessId> v;
    for (ProcessId j = 0; j < cfg.n; ++j) {
      if (!isCrashed(j)) v.push_back(j);
    }
    return v;
  }

  // ---- run loop ----

  /// Process one event. Returns false once the queue drains (all crashed).
  bool step() {
    applyDueCrashes();
    Event ev;
    while (true) {
      if (queue.empty()) return false;
      ev = std::move(queue.front());
      queue.pop_front();
      if (ev.type == Event::Type::Deliver) channelLoad_[ev.src][ev.dst]--;
      if (!ev.cancelled) break;
    }
    dispatch(ev);
    ++clock;
    updateCycles();
    return true;
  }

  /// Run to the step budget; `observer` is evaluated after every step and may
  /// stop the run early by returning true.
  void run(const std::function<bool(World&)>& observer = {}) {
    while (clock < cfg.budget) {
      if (!injected && cfg.faults.transient.kind != "none" && clock >= cfg.faults.transient.at) {
        injectTransient(cfg.faults.transient);
      }
      if (!step()) break;
      if (observer && observer(*this)) break;
    }
  }

  // ---- scenario setup hooks ----

  void scheduleMvPropose(ProcessId i, Value v) { procs[i].proposeValue = std::move(v); }

  void scheduleBroadcast(ProcessId i, uint64_t step, Value payload) {
    procs[i].pendingBroadcasts.emplace_back(step, std::move(payload));
    std::sort(procs[i].pendingBroadcasts.begin(), procs[i].pendingBroadcasts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  uint64_t iterationsOf(ProcessId i) const {
    if (cfg.scenario == Scenario::ToUrb || cfg.scenario == Scenario::Rsm) {
      return procs[i].tour->iterationsCompleted;
    }
    return procs[i].activations;
  }

  // ---- fault injection ----

  void injectTransient(const TransientRecipe& recipe);

 private:
  class WorldEnv final : public Env {
   public:
    WorldEnv(World& w, ProcessId pid) : w_(w), pid_(pid) {}
    void send(ProcessId dst, Packet p) override { w_.sendFrom(pid_, dst, std::move(p)); }
    const std::vector<ProcessId>& trusted() override { return w_.trustedOracle(); }
    void bcSubmit(BcSubmission s) override { w_.bcSubmitFrom(pid_, std::move(s)); }
    void trace(TraceKind k, int64_t a = 0, int64_t b = 0, int64_t c = 0, int64_t d = 0,
               uint64_t h = 0) override {
      if (k == TraceKind::UrbBroadcast) ++w_.metrics.urbBroadcasts;
      w_.trace.record(TraceRecord{w_.clock, k, pid_, a, b, c, d, h});
    }

   private:
    World& w_;
    ProcessId pid_;
  };

  friend class WorldEnv;

  std::vector<ProcessId> trustedScratch_;
  std::vector<uint64_t> cycleMark_;
  std::vector<std::vector<int>> dropRun_;
  std::vector<std::vector<int>> channelLoad_;

  void applyDueCrashes() {
    for (const auto& [pid, at] : cfg.faults.crashSteps) {
      if (at <= clock && pid >= 0 && pid < cfg.n && !isCrashed(pid)) {
        crashedAt[pid] = clock;
        trace.record(TraceRecord{clock, TraceKind::Crash, pid});
      }
    }
  }

  void updateCycles() {
    bool all = true;
    bool any = false;
    for (ProcessId j = 0; j < cfg.n; ++j) {
      if (isCrashed(j)) continue;
      any = true;
      if (iterationsOf(j) <= cycleMark_[j]) all = false;
    }
    if (any && all) {
      ++cycles;
      for (ProcessId j = 0; j < cfg.n; ++j) cycleMark_[j] = iterationsOf(j);
    }
  }

  // Every send runs through the channel fault lottery: drop (with forced
  // fairness), duplicate, and randomized queue position for reordering. The
  // self-channel is process-internal and exempt.
  void sendFrom(ProcessId src, ProcessId dst, Packet p) {
    ++metrics.messagesSent;
    if (dst < 0 || dst >= cfg.n) return;
    if (dst == src) {
      queue.push_back(deliverEvent(src, dst, std::move(p)));
      channelLoad_[src][dst]++;
      return;
    }
    int& run = dropRun_[src][dst];
    bool forced = cfg.faults.dropProb >= 1.0 && run + 1 >= cfg.faults.forcedDeliveryPeriod;
    if (!forced && chance(cfg.faults.dropProb)) {
      ++run;
      ++metrics.messagesDropped;
      return;
    }
    run = 0;
    enqueueChannel(src, dst, p);
    if (chance(cfg.faults.dupProb)) {
      ++metrics.duplicates;
      enqueueChannel(src, dst, std::move(p));
    }
  }

  static Event activateEvent(ProcessId pid) {
    Event ev;
    ev.type = Event::Type::Activate;
    ev.pid = pid;
    return ev;
  }

  Event deliverEvent(ProcessId src, ProcessId dst, Packet p) {
    Event ev;
    ev.type = Event::Type::Deliver;
    ev.src = src;
    ev.dst = dst;
    ev.packet = std::move(p);
    return ev;
  }

  void enqueueChannel(ProcessId src, ProcessId dst, Packet p) {
    if (channelLoad_[src][dst] >= cfg.channelCapacity) {
      for (auto& ev : queue) {  // capacity bound: the oldest in-transit packet is lost
        if (!ev.cancelled && ev.type == Event::Type::Deliver && ev.src == src && ev.dst == dst) {
          ev.cancelled = true;
          channelLoad_[src][dst]--;
          ++metrics.overflowDrops;
          break;
        }
      }
    }
    insertEvent(deliverEvent(src, dst, std::move(p)), cfg.faults.reorder);
    channelLoad_[src][dst]++;
  }

  void insertEvent(Event ev, bool randomPosition) {
    if (randomPosition && !queue.empty()) {
      size_t pos = static_cast<size_t>(randomBelow(queue.size() + 1));
      queue.insert(queue.begin() + static_cast<long>(pos), std::move(ev));
    } else {
      queue.push_back(std::move(ev));
    }
  }

  void bcSubmitFrom(ProcessId pid, BcSubmission s) {
    if (!s.reannounce) {
      for (const auto& [k, b] : s.entries) {
        (void)k;
        (void)b;
        ++metrics.bcInvocationsTotal;
        ++metrics.bcInvocationsPerObject[{pid, s.tag}];
        metrics.bcSubmitSteps[{pid, s.tag}].insert(clock);
      }
    }
    Event ev;
    ev.type = Event::Type::BcSubmit;
    ev.pid = pid;
    ev.tag = s.tag;
    ev.entries = std::move(s.entries);
    insertEvent(std::move(ev), true);  // submission delay varies with the schedule
  }

  void dispatch(Event& ev) {
    switch (ev.type) {
      case Event::Type::Activate: {
        if (isCrashed(ev.pid)) return;  // crashed processes take no steps
        activate(ev.pid);
        queue.push_back(activateEvent(ev.pid));
        return;
      }
      case Event::Type::Deliver: {
        if (ev.dst < 0 || ev.dst >= cfg.n || isCrashed(ev.dst)) return;
        ++metrics.messagesDelivered;
        deliver(ev.src, ev.dst, ev.packet);
        return;
      }
      case Event::Type::BcSubmit: {
        for (const auto& [k, b] : ev.entries) {
          auto key = std::make_pair(ev.tag, k);
          auto it = ledger.find(key);
          if (it == ledger.end()) it = ledger.emplace(key, b).first;  // first submission wins
          Event note;
          note.type = Event::Type::BcNotify;
          note.pid = ev.pid;
          note.tag = ev.tag;
          note.k = k;
          note.decision = it->second;
          insertEvent(std::move(note), true);  // decision propagation is delayed, never lost
        }
        return;
      }
      case Event::Type::BcNotify: {
        if (ev.pid < 0 || ev.pid >= cfg.n || isCrashed(ev.pid)) return;
        WorldEnv env(*this, ev.pid);
        procs[ev.pid].bc.onDecide(env, ev.tag, ev.k, ev.decision);
        return;
      }
    }
  }

  void activate(ProcessId pid) {
    Proc& p = procs[pid];
    WorldEnv env(*this, pid);
    if (p.tour) p.tour->now = clock;

    while (!p.pendingBroadcasts.empty() && p.pendingBroadcasts.front().first <= clock) {
      Value payload = std::move(p.pendingBroadcasts.front().second);
      p.pendingBroadcasts.pop_front();
      if (p.tour) {
        appBroadcastLog.emplace_back(pid, clock, payload);
        p.tour->toBroadcast(env, p.urb, payload);
      }
    }

    p.urb.maintenance(env);
    switch (cfg.scenario) {
      case Scenario::Mv: {
        if (p.proposeValue) {
          if (mvPropose(p.mv, p.bc, cfg.n, kMvTag, p.proposeValue)) {
            proposalLog.push_back(*p.proposeValue);
            env.trace(TraceKind::MvPropose, static_cast<int64_t>(kMvTag), 0, 0, 0,
                      fnv1a64(*p.proposeValue));
          }
          p.proposeValue.reset();
        }
        mvDoForever(p.mv, p.bc, p.urb, env, cfg.variant, cfg.n, cfg.rebroadcastPeriod);
        p.bc.upkeep(env);
        pollResult(pid, mvResult(p.mv, p.bc, cfg.n));
        break;
      }
      case Scenario::Mrt: {
        if (p.proposeValue) {
          p.mrt.propose(env, p.urb, *p.proposeValue);
          proposalLog.push_back(*p.proposeValue);
          p.proposeValue.reset();
        }
        p.mrt.step(env, p.bc);
        p.bc.upkeep(env);
        ConsensusResult r = p.mrt.decidedValue ? ConsensusResult::decided(*p.mrt.decidedValue)
                                               : ConsensusResult::bot();
        pollResult(pid, r);
        break;
      }
      case Scenario::ToUrb:
      case Scenario::Rsm: {
        p.tour->activation(env, p.urb, p.bc, cfg.variant, cfg.rebroadcastPeriod);
        break;
      }
    }
    ++p.activations;
  }

  void deliver(ProcessId src, ProcessId dst, const Packet& pkt) {
    Proc& p = procs[dst];
    WorldEnv env(*this, dst);
    if (p.tour) p.tour->now = clock;
    switch (pkt.kind) {
      case PacketKind::UrbData: {
        auto ready = p.urb.onData(env, pkt.origin, pkt.stream, pkt.seq, pkt.body);
        for (auto& [origin, body] : ready) {
          auto msg = decodeMessage(body);
          if (!msg || msg->kind != MsgKind::Proposal) continue;
          routeProposal(env, dst, origin, *msg);
        }
        return;
      }
      case PacketKind::UrbAck: {
        env.trace(TraceKind::UrbAck, src, pkt.stream, static_cast<int64_t>(pkt.seq));
        p.urb.onAck(src, pkt.stream, pkt.seq);
        return;
      }
      case PacketKind::Direct: {
        if (!p.tour) return;  // stray control messages outside to_urb scenarios
        if (pkt.msg.kind == MsgKind::Sync) {
          p.tour->onSync(env, p.urb, src, pkt.msg.sn);
        } else if (pkt.msg.kind == MsgKind::SyncAck) {
          p.tour->onSyncAck(env, src, pkt.msg.sn, pkt.msg.seq, pkt.msg.obsS, pkt.msg.ready);
        }
        return;
      }
    }
  }

  void routeProposal(Env& env, ProcessId dst, ProcessId origin, const Message& msg) {
    Proc& p = procs[dst];
    switch (cfg.scenario) {
      case Scenario::Mv:
        if (msg.tag == kMvTag) mvOnProposal(p.mv, p.bc, cfg.n, kMvTag, origin, msg.value);
        break;
      case Scenario::Mrt:
        p.mrt.onProposal(origin, msg.value);
        break;
      case Scenario::ToUrb:
      case Scenario::Rsm:
        p.tour->onProposalEnvelope(p.bc, msg.tag, origin, msg.value);
        break;
    }
    (void)env;
  }

  void pollResult(ProcessId pid, const ConsensusResult& r) {
    ResultHistory& h = histories[pid];
    if (!(r == h.last)) {
      trace.record(TraceRecord{clock, TraceKind::MvResult, pid, static_cast<int64_t>(kMvTag),
                               static_cast<int64_t>(r.kind), 0, 0,
                               r.isDecided() ? fnv1a64(r.value) : 0});
      h.last = r;
    }
    if (!r.isBot() && !h.leftBot) {
      h.leftBot = true;
      h.stepLeftBot = clock;
    }
    if (r.isDecided()) {
      if (!h.decidedEver) {
        h.decidedEver = true;
        h.firstDecided = r;
        trace.record(TraceRecord{clock, TraceKind::MvDecide, pid, static_cast<int64_t>(kMvTag), 0,
                                 0, 0, fnv1a64(r.value)});
      } else if (!(r == h.firstDecided)) {
        h.unstable = true;
      }
    } else if (h.decidedEver) {
      h.unstable = true;
    }
    if (r.isError() && !h.errorEver) {
      h.errorEver = true;
      trace.record(TraceRecord{clock, TraceKind::MvTransientError, pid,
                               static_cast<int64_t>(kMvTag)});
    }
  }
};

// ---------------------------------------------------------------------------
// Transient fault injection
// ---------------------------------------------------------------------------

inline void World::injectTransient(const TransientRecipe& recipe) {
  injected = true;
  cyclesAtInjection = cycles;
  if (recipe.kind == "none" || recipe.kind.empty()) return;
  authentic = false;
  trace.record(TraceRecord{clock, TraceKind::Transient, -1, 0, 0, 0, 0, fnv1a64(recipe.kind)});

  auto corruptValue = [&]() -> Value {
    Value v = "x";
    v += static_cast<char>('a' + randomBelow(26));
    v += static_cast<char>('a' + randomBelow(26));
    return v;
  };

  auto allFalse = [&]() {
    for (ProcessId i = 0; i < cfg.n; ++i) {
      if (isCrashed(i)) continue;
      Proc& p = procs[i];
      switch (cfg.scenario) {
        case Scenario::Mv:
          for (int k = 0; k < cfg.n; ++k) p.bc.corrupt(kMvTag, k, BcObject{true, false, false});
          break;
        case Scenario::Mrt: {
          uint64_t depth = recipe.depth ? recipe.depth : cfg.mrtRoundBudget * 2;
          for (uint64_t k = 0; k < depth; ++k) {
            p.bc.corrupt(kMrtBcTag, static_cast<int>(k), BcObject{true, false, false});
          }
          break;
        }
        case Scenario::ToUrb:
        case Scenario::Rsm:
          for (int s = 0; s < kRingSize; ++s) {
            if (p.tour->cs[s].active) {
              for (int k = 0; k < cfg.n; ++k) {
                p.bc.corrupt(p.tour->cs[s].objectTag, k, BcObject{true, false, false});
              }
            }
          }
          break;
      }
    }
  };

  auto bcRandom = [&]() {
    for (ProcessId i = 0; i < cfg.n; ++i) {
      if (isCrashed(i) || chance(0.35)) continue;
      Proc& p = procs[i];
      std::vector<uint64_t> tagList;
      if (cfg.scenario == Scenario::Mv) tagList.push_back(kMvTag);
      if (cfg.scenario == Scenario::Mrt) tagList.push_back(kMrtBcTag);
      if (p.tour) {
        for (int s = 0; s < kRingSize; ++s) {
          if (p.tour->cs[s].active) tagList.push_back(p.tour->cs[s].objectTag);
        }
      }
      for (uint64_t tag : tagList) {
        int range = cfg.scenario == Scenario::Mrt ? static_cast<int>(cfg.mrtRoundBudget) : cfg.n;
        for (int k = 0; k < range; ++k) {
          switch (randomBelow(5)) {
            case 0: p.bc.corrupt(tag, k, BcObject{}); break;
            case 1: p.bc.corrupt(tag, k, BcObject{true, chance(0.5), std::nullopt}); break;
            case 2: p.bc.corrupt(tag, k, BcObject{true, chance(0.5), false}); break;
            case 3: p.bc.corrupt(tag, k, BcObject{true, chance(0.5), true}); break;
            default: break;  // leave the slot alone
          }
        }
      }
    }
  };

  auto mvRandom = [&]() {
    for (ProcessId i = 0; i < cfg.n; ++i) {
      if (isCrashed(i) || chance(0.3)) continue;
      MvObject& o = procs[i].mv;
      MvCorruption c;
      if (chance(0.2)) c.active = chance(0.7);
      if (chance(0.3)) c.v = chance(0.5) ? std::optional<Value>(corruptValue()) : std::nullopt;
      if (chance(0.4)) c.oneTerm = chance(0.5);
      if (chance(0.4)) {
        c.txD = chance(0.5)
                    ? std::optional<TxDescriptor>(TxDescriptor{i, kProtoStream, randomU64() % 1000 + 100, kMvTag})
                    : std::optional<TxDescriptor>();
      }
      for (int j = 0; j < cfg.n; ++j) {
        if (chance(0.25)) {
          c.proposals[j] = chance(0.5) ? std::optional<Value>(corruptValue()) : std::nullopt;
        }
      }
      corruptMv(o, c);
    }
    // Keep the convergence premise: if any correct process lost its object,
    // some correct process must still hold an active object with a value to
    // spread.
    bool someoneInactive = false;
    bool someoneSpreads = false;
    for (ProcessId i : correctSet()) {
      if (!procs[i].mv.active) someoneInactive = true;
      if (procs[i].mv.active && procs[i].mv.v.has_value()) someoneSpreads = true;
    }
    auto correct = correctSet();
    if (someoneInactive && !someoneSpreads && !correct.empty()) {
      ProcessId i = correct.front();
      MvObject& o = procs[i].mv;
      o.active = true;
      o.objectTag = kMvTag;
      o.v = corruptValue();
      if (static_cast<int>(o.proposals.size()) != cfg.n) o.proposals.assign(cfg.n, std::nullopt);
    }
  };

  auto urbRandom = [&]() {
    for (ProcessId i = 0; i < cfg.n; ++i) {
      if (isCrashed(i) || chance(0.4)) continue;
      UrbNode& u = procs[i].urb;
      for (ProcessId j = 0; j < cfg.n; ++j) {
        if (chance(0.3)) {
          auto& st = u.in[j][randomBelow(2)];
          if (chance(0.5)) {
            st.consumed += randomBelow(3);  // skip ahead: messages lost to the app
          } else if (st.consumed > 0) {
            st.consumed -= std::min<uint64_t>(st.consumed, randomBelow(3));  // re-delivery hazard
          }
        }
      }
      if (chance(0.3)) {
        uint8_t stream = static_cast<uint8_t>(randomBelow(2));
        uint64_t back = randomBelow(3);
        u.nextSeq[stream] = u.nextSeq[stream] > back ? u.nextSeq[stream] - back : 1;
      }
      if (chance(0.3)) {
        for (auto& [seq, tx] : u.outbox[kProtoStream]) {
          if (chance(0.5)) tx.acked.clear();
        }
      }
    }
  };

  auto channelGarbage = [&]() {
    int count = 2 + static_cast<int>(randomBelow(6));
    for (int g = 0; g < count; ++g) {
      ProcessId src = static_cast<ProcessId>(randomBelow(cfg.n));
      ProcessId dst = static_cast<ProcessId>(randomBelow(cfg.n));
      Packet p;
      switch (randomBelow(3)) {
        case 0: {
          p.kind = PacketKind::Direct;
          p.msg.kind = MsgKind::Sync;
          p.msg.sender = src;
          p.msg.dest = dst;
          p.msg.sn = randomBelow(1000);
          break;
        }
        case 1: {
          p.kind = PacketKind::Direct;
          p.msg.kind = MsgKind::SyncAck;
          p.msg.sender = src;
          p.msg.dest = dst;
          p.msg.sn = randomBelow(1000);
          p.msg.seq = randomBelow(50);
          p.msg.obsS = randomBelow(50);
          p.msg.ready = ReadyVector(cfg.n);
          for (int j = 0; j < cfg.n; ++j) p.msg.ready[j] = randomBelow(8);
          break;
        }
        default: {
          p.kind = PacketKind::UrbData;
          p.origin = src;
          p.stream = kProtoStream;
          p.seq = randomBelow(20) + 1;
          Message m;
          m.kind = MsgKind::Proposal;
          m.tag = randomBelow(8);
          m.value = chance(0.7) ? std::optional<Value>(corruptValue()) : std::nullopt;
          p.body = encodeMessage(m);
          break;
        }
      }
      enqueueChannel(src, dst, std::move(p));
    }
    // flip bytes in a few in-transit packets through the canonical encoding
    for (auto& ev : queue) {
      if (ev.cancelled || ev.type != Event::Type::Deliver || !chance(0.15)) continue;
      std::string bytes = encodePacket(ev.packet);
      if (bytes.empty()) continue;
      bytes[randomBelow(bytes.size())] ^= static_cast<char>(1 + randomBelow(255));
      auto re = decodePacket(bytes);
      if (re) {
        ev.packet = *re;
      } else {
        ev.cancelled = true;  // undecodable packet: counts as lost
        channelLoad_[ev.src][ev.dst]--;
      }
    }
  };

  auto toUrbRandom = [&]() {
    for (ProcessId i = 0; i < cfg.n; ++i) {
      if (isCrashed(i) || chance(0.3)) continue;
      ToUrbNode& t = *procs[i].tour;
      if (chance(0.4)) t.obsS += randomBelow(4);
      if (chance(0.3)) t.obsS = t.obsS > 2 ? t.obsS - randomBelow(3) : 0;
      if (chance(0.3)) t.sn = t.sn > 4 ? t.sn - randomBelow(5) : 0;
      if (chance(0.3)) t.phase = chance(0.5) ? ToUrbNode::Phase::Start : ToUrbNode::Phase::Collect;
      for (int s = 0; s < kRingSize; ++s) {
        if (chance(0.3)) {
          if (t.cs[s].active && chance(0.4)) {
            t.cs[s] = MvObject{};
            t.slotSeq[s] = 0;
          } else {
            uint64_t seq = t.obsS + randomBelow(5);
            t.cs[s].active = true;
            t.cs[s].objectTag = seq;
            t.cs[s].v = chance(0.7) ? std::optional<Value>(encodeReady(ReadyVector(cfg.n)))
                                    : std::optional<Value>(corruptValue());
            if (static_cast<int>(t.cs[s].proposals.size()) != cfg.n) {
              t.cs[s].proposals.assign(cfg.n, std::nullopt);
            }
            t.slotSeq[s] = seq;
          }
        }
      }
      if (chance(0.4)) t.acks.clear();
      if (chance(0.3)) t.lastAllSeq.insert(randomBelow(20));
    }
  };

  auto rsmState = [&]() {
    for (ProcessId i = 0; i < cfg.n; ++i) {
      if (isCrashed(i) || chance(0.4)) continue;
      auto* r = dynamic_cast<RsmNode*>(procs[i].tour.get());
      if (!r) continue;
      if (chance(0.6)) r->automaton.counters[std::string(1, static_cast<char>('a' + randomBelow(4)))] = randomBelow(1000);
      if (chance(0.5)) r->automaton.applied = randomBelow(1000);
      if (chance(0.3)) r->automaton.counters.clear();
    }
  };

  auto applyKind = [&](const std::string& kind) {
    if (kind == "all_false") allFalse();
    else if (kind == "bc_random") bcRandom();
    else if (kind == "mv_random") mvRandom();
    else if (kind == "urb_random") urbRandom();
    else if (kind == "channel_garbage") channelGarbage();
    else if (kind == "to_urb_random") toUrbRandom();
    else if (kind == "rsm_state") rsmState();
    else if (kind == "k_corrupt") {
      // corrupted round counter plus a partially corrupted object array
      for (ProcessId i = 0; i < cfg.n; ++i) {
        if (isCrashed(i)) continue;
        Proc& p = procs[i];
        if (cfg.scenario == Scenario::Mrt) {
          p.mrt.k = randomBelow(1ull << 40);
          uint64_t depth = recipe.depth ? recipe.depth : randomBelow(cfg.mrtRoundBudget * 2);
          uint64_t base = p.mrt.k;
          for (uint64_t k = 0; k < depth; ++k) {
            p.bc.corrupt(kMrtBcTag, static_cast<int>((base + k) % (cfg.mrtRoundBudget * 4 + 16)),
                         BcObject{true, false, false});
          }
        } else {
          uint64_t depth = std::min<uint64_t>(cfg.n, 1 + randomBelow(cfg.n));
          for (uint64_t k = 0; k < depth; ++k) {
            p.bc.corrupt(kMvTag, static_cast<int>(k), BcObject{true, false, false});
          }
        }
      }
    }
  };

  if (recipe.kind == "mixed") {
    static const char* pool[] = {"bc_random", "mv_random", "urb_random", "channel_garbage"};
    static const char* poolTo[] = {"bc_random", "to_urb_random", "urb_random", "channel_garbage"};
    int picks = 1 + static_cast<int>(randomBelow(3));
    for (int i = 0; i < picks; ++i) {
      if (cfg.scenario == Scenario::ToUrb || cfg.scenario == Scenario::Rsm) {
        applyKind(poolTo[randomBelow(4)]);
      } else {
        applyKind(pool[randomBelow(4)]);
      }
    }
    if (cfg.scenario == Scenario::Rsm) rsmState();
  } else {
    applyKind(recipe.kind);
  }
}

}  // namespace stabcon
