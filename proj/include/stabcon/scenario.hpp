#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "stabcon/invariants.hpp"
#include "stabcon/simulator.hpp"

namespace stabcon {

using OrderedJson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config <-> JSON
// ---------------------------------------------------------------------------

inline std::string scenarioName(Scenario s) {
  switch (s) {
    case Scenario::Mv: return "mv";
    case Scenario::Mrt: return "mrt";
    case Scenario::ToUrb: return "to_urb";
    case Scenario::Rsm: return "rsm";
  }
  return "mv";
}

inline std::optional<Scenario> scenarioFromName(const std::string& s) {
  if (s == "mv") return Scenario::Mv;
  if (s == "mrt") return Scenario::Mrt;
  if (s == "to_urb") return Scenario::ToUrb;
  if (s == "rsm") return Scenario::Rsm;
  return std::nullopt;
}

inline OrderedJson configToJson(const Config& c) {
  OrderedJson j;
  j["n"] = c.n;
  j["t"] = c.t;
  j["seed"] = c.seed;
  j["scenario"] = scenarioName(c.scenario);
  j["variant"] = c.variant == Variant::Sequential ? "seq" : "conc";
  j["delta"] = c.delta;
  j["budget"] = c.budget;
  j["channel_capacity"] = c.channelCapacity;
  j["rebroadcast_period"] = c.rebroadcastPeriod;
  j["app_broadcasts"] = c.appBroadcasts;
  j["broadcast_window"] = c.broadcastWindow;
  j["cutoff"] = c.cutoff;
  j["mrt_round_budget"] = c.mrtRoundBudget;
  OrderedJson f;
  OrderedJson crashes = OrderedJson::object();
  for (const auto& [pid, at] : c.faults.crashSteps) crashes[std::to_string(pid)] = at;
  f["crash_steps"] = crashes;
  f["drop_prob"] = c.faults.dropProb;
  f["dup_prob"] = c.faults.dupProb;
  f["reorder"] = c.faults.reorder;
  f["forced_delivery_period"] = c.faults.forcedDeliveryPeriod;
  f["detection_delay"] = c.faults.detectionDelay;
  f["transient"] = {{"kind", c.faults.transient.kind},
                    {"at", c.faults.transient.at},
                    {"depth", c.faults.transient.depth}};
  j["faults"] = f;
  return j;
}

inline std::optional<Config> configFromJson(const OrderedJson& j, std::string* err = nullptr) {
  Config c;
  auto fail = [&](const std::string& m) {
    if (err) *err = m;
    return std::optional<Config>();
  };
  try {
    if (j.contains("n")) c.n = j.at("n").get<int>();
    if (j.contains("t")) c.t = j.at("t").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("scenario")) {
      auto s = scenarioFromName(j.at("scenario").get<std::string>());
      if (!s) return fail("unknown scenario");
      c.scenario = *s;
    }
    if (j.contains("variant")) {
      std::string v = j.at("variant").get<std::string>();
      if (v == "seq") c.variant = Variant::Sequential;
      else if (v == "conc") c.variant = Variant::Concurrent;
      else return fail("unknown variant");
    }
    if (j.contains("delta")) c.delta = j.at("delta").get<uint64_t>();
    if (j.contains("budget")) c.budget = j.at("budget").get<uint64_t>();
    if (j.contains("channel_capacity")) c.channelCapacity = j.at("channel_capacity").get<int>();
    if (j.contains("rebroadcast_period")) c.rebroadcastPeriod = j.at("rebroadcast_period").get<int>();
    if (j.contains("app_broadcasts")) c.appBroadcasts = j.at("app_broadcasts").get<int>();
    if (j.contains("broadcast_window")) c.broadcastWindow = j.at("broadcast_window").get<uint64_t>();
    if (j.contains("cutoff")) c.cutoff = j.at("cutoff").get<uint64_t>();
    if (j.contains("mrt_round_budget")) c.mrtRoundBudget = j.at("mrt_round_budget").get<uint64_t>();
    if (j.contains("faults")) {
      const auto& f = j.at("faults");
      if (f.contains("crash_steps")) {
        for (auto it = f.at("crash_steps").begin(); it != f.at("crash_steps").end(); ++it) {
          c.faults.crashSteps[std::stoi(it.key())] = it.value().get<uint64_t>();
        }
      }
      if (f.contains("drop_prob")) c.faults.dropProb = f.at("drop_prob").get<double>();
      if (f.contains("dup_prob")) c.faults.dupProb = f.at("dup_prob").get<double>();
      if (f.contains("reorder")) c.faults.reorder = f.at("reorder").get<bool>();
      if (f.contains("forced_delivery_period")) {
        c.faults.forcedDeliveryPeriod = f.at("forced_delivery_period").get<int>();
      }
      if (f.contains("detection_delay")) c.faults.detectionDelay = f.at("detection_delay").get<int>();
      if (f.contains("transient")) {
        const auto& t = f.at("transient");
        if (t.contains("kind")) c.faults.transient.kind = t.at("kind").get<std::string>();
        if (t.contains("at")) c.faults.transient.at = t.at("at").get<uint64_t>();
        if (t.contains("depth")) c.faults.transient.depth = t.at("depth").get<uint64_t>();
      }
    }
  } catch (const std::exception& e) {
    return fail(std::string("config parse error: ") + e.what());
  }
  return c;
}

inline std::optional<std::string> validateConfig(const Config& c) {
  if (c.n < 3) return "n must be at least 3";
  if (c.t < 0 || c.t >= (c.n + 1) / 2) return "t must satisfy t < n/2";
  if (static_cast<int>(c.faults.crashSteps.size()) > (c.n - 1) / 2) {
    return "crash count must not exceed floor((n-1)/2)";
  }
  for (const auto& [pid, at] : c.faults.crashSteps) {
    if (pid < 0 || pid >= c.n) return "crash schedule names an unknown process";
  }
  if (c.budget == 0) return "budget must be positive";
  if (c.delta == 0) return "delta must be positive";
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Run reports
// ---------------------------------------------------------------------------

struct Verdict {
  bool pass = true;
  std::string detail;
};

struct RunReport {
  Config config;
  bool pass = true;
  std::string outcome;
  std::vector<std::pair<std::string, Verdict>> verdicts;
  uint64_t steps = 0;
  uint64_t cycles = 0;
  uint64_t traceHash = 0;
  uint64_t traceEvents = 0;
  uint64_t urbBroadcasts = 0;
  uint64_t bcInvocationsTotal = 0;
  uint64_t bcInvocationsMaxPerObject = 0;
  uint64_t legalityCycles = 0;    // cycles from injection to the last legality violation
  uint64_t quiescenceCycles = 0;  // cycles from cutoff until pred holds for good

  void add(const std::string& name, bool ok, std::string detail = "") {
    verdicts.emplace_back(name, Verdict{ok, std::move(detail)});
    pass = pass && ok;
  }
  void add(const std::string& name, const CheckOutcome& o) { add(name, o.pass, o.witness); }
};

inline OrderedJson reportToJson(const RunReport& r) {
  OrderedJson j;
  j["schema"] = 1;
  j["pass"] = r.pass;
  j["outcome"] = r.outcome;
  OrderedJson v = OrderedJson::object();
  for (const auto& [name, verdict] : r.verdicts) {
    OrderedJson e;
    e["pass"] = verdict.pass;
    if (!verdict.detail.empty()) e["witness"] = verdict.detail;
    v[name] = e;
  }
  j["verdicts"] = v;
  OrderedJson m;
  m["steps"] = r.steps;
  m["cycles"] = r.cycles;
  m["urb_broadcasts"] = r.urbBroadcasts;
  m["bc_invocations_total"] = r.bcInvocationsTotal;
  m["bc_invocations_max_per_object"] = r.bcInvocationsMaxPerObject;
  m["legality_cycles"] = r.legalityCycles;
  m["quiescence_cycles"] = r.quiescenceCycles;
  m["trace_events"] = r.traceEvents;
  j["metrics"] = m;
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(r.traceHash));
  j["trace_hash"] = hex;
  j["config"] = configToJson(r.config);
  return j;
}

inline void fillCommonMetrics(RunReport& r, const World& w) {
  r.steps = w.clock;
  r.cycles = w.cycles;
  r.traceHash = w.trace.hash();
  r.traceEvents = w.trace.count();
  r.urbBroadcasts = w.metrics.urbBroadcasts;
  r.bcInvocationsTotal = w.metrics.bcInvocationsTotal;
  for (const auto& [key, count] : w.metrics.bcInvocationsPerObject) {
    r.bcInvocationsMaxPerObject = std::max(r.bcInvocationsMaxPerObject, count);
  }
}

// ---------------------------------------------------------------------------
// Scenario runners
// ---------------------------------------------------------------------------

inline void scheduleConsensusInputs(World& w) {
  std::mt19937_64 setup(w.cfg.seed ^ 0x5eedf00dull);
  bool shared = setup() % 10 < 3;
  for (ProcessId i = 0; i < w.cfg.n; ++i) {
    Value v = shared ? Value("shared") : "v" + std::to_string(i) + "-" + std::to_string(setup() % 997);
    w.scheduleMvPropose(i, v);
  }
}

inline void scheduleAppTraffic(World& w) {
  std::mt19937_64 setup(w.cfg.seed ^ 0xb40adca5ull);
  int count = w.cfg.appBroadcasts;
  uint64_t window = w.cfg.broadcastWindow;
  if (w.cfg.cutoff > 0) {
    // quiescence runs measure pred from the cutoff; in-flight agreements have
    // to settle before it, so traffic ends with a margin
    uint64_t margin = w.cfg.cutoff > 2400 ? 1200 : w.cfg.cutoff / 2;
    window = std::min(window, std::max<uint64_t>(1, w.cfg.cutoff - margin));
  }
  for (int b = 0; b < count; ++b) {
    ProcessId sender = static_cast<ProcessId>(setup() % w.cfg.n);
    uint64_t step = window == 0 ? 0 : setup() % window;
    Value payload;
    if (w.cfg.scenario == Scenario::Rsm) {
      payload = "k" + std::to_string(b % 3) + "=" + std::to_string(1 + b % 7);
    } else {
      payload = "m" + std::to_string(b) + ":" + std::to_string(sender);
    }
    w.scheduleBroadcast(sender, step, payload);
  }
}

/// Runs a multivalued-consensus scenario and evaluates either the
/// Definition-1 suite (authentic runs) or the convergence suite (runs with a
/// transient injection).
inline RunReport runMv(const Config& cfg) {
  World w(cfg);
  RunReport r;
  r.config = cfg;
  scheduleConsensusInputs(w);

  bool convergence = cfg.faults.transient.kind != "none";
  uint64_t goalStep = UINT64_MAX;
  const uint64_t grace = 250;
  w.run([&](World& world) {
    if (goalStep == UINT64_MAX) {
      bool all = true;
      for (ProcessId i : world.correctSet()) {
        const ResultHistory& h = world.histories[i];
        bool done = convergence ? h.leftBot : h.decidedEver;
        if (!done) all = false;
      }
      if (all) goalStep = world.clock;
    }
    return goalStep != UINT64_MAX && world.clock >= goalStep + grace;
  });

  if (convergence) {
    bool allLeftBot = true;
    bool allSettled = true;
    for (ProcessId i : w.correctSet()) {
      const auto& p = w.procs[i];
      if (!w.histories[i].leftBot) allLeftBot = false;
      bool fine = checkDef2Consistent(p.mv, p.bc, cfg.n) || w.histories[i].last.isError();
      if (!fine) allSettled = false;
    }
    r.add("left_bot", allLeftBot, allLeftBot ? "" : "a correct process never left Bot");
    r.add("def2_or_error", allSettled, allSettled ? "" : "inconsistent final object without error");
    r.add("bc_bound", checkBcBound(w));
    bool anyError = false;
    for (ProcessId i : w.correctSet()) anyError = anyError || w.histories[i].errorEver;
    r.outcome = anyError ? "transient_error" : "decided";
  } else {
    r.add("validity", checkValidity(w));
    r.add("agreement", checkAgreement(w));
    r.add("integrity", checkIntegrity(w));
    r.add("termination", checkTermination(w));
    r.add("bc_bound", checkBcBound(w));
    bool consistent = true;
    for (ProcessId i : w.correctSet()) {
      if (!checkDef2Consistent(w.procs[i].mv, w.procs[i].bc, cfg.n)) consistent = false;
    }
    r.add("def2_final", consistent);
    r.outcome = "decided";
  }

  if (cfg.variant == Variant::Concurrent) {
    bool oneStep = true;
    std::string witness;
    for (const auto& [key, steps] : w.metrics.bcSubmitSteps) {
      if (key.second == kMvTag && steps.size() > 1) {
        oneStep = false;
        witness = "p" + std::to_string(key.first) + " submitted over " +
                  std::to_string(steps.size()) + " steps";
      }
    }
    r.add("concurrent_one_step", oneStep, witness);
  }

  fillCommonMetrics(r, w);
  return r;
}

/// Runs the blocking baseline. `expectDecision` selects whether liveness is a
/// pass condition (clean runs) or merely reported (contrast runs).
inline RunReport runMrt(const Config& cfg, bool expectDecision = true) {
  World w(cfg);
  RunReport r;
  r.config = cfg;
  scheduleConsensusInputs(w);

  uint64_t goalStep = UINT64_MAX;
  const uint64_t grace = 200;
  w.run([&](World& world) {
    if (goalStep == UINT64_MAX) {
      bool all = true;
      for (ProcessId i : world.correctSet()) {
        if (!world.histories[i].decidedEver) all = false;
      }
      if (all) goalStep = world.clock;
    }
    return goalStep != UINT64_MAX && world.clock >= goalStep + grace;
  });

  bool decidedAll = true;
  for (ProcessId i : w.correctSet()) {
    if (!w.histories[i].decidedEver) decidedAll = false;
  }
  r.outcome = decidedAll ? "decided" : "liveness_failure";
  if (expectDecision) {
    r.add("termination", decidedAll, decidedAll ? "" : "a correct process never returned");
    if (w.authentic) {
      r.add("validity", checkValidity(w));
      r.add("agreement", checkAgreement(w));
      r.add("integrity", checkIntegrity(w));
    }
  }
  fillCommonMetrics(r, w);
  return r;
}

struct StepFlags {
  uint64_t step = 0;
  uint64_t cycle = 0;
  bool legal = true;
  bool pred = false;
  int activeSlots = 0;
};

inline std::vector<std::vector<DeliveryRecord>> collectLogs(const World& w) {
  std::vector<std::vector<DeliveryRecord>> logs;
  for (ProcessId i : w.correctSet()) logs.push_back(w.procs[i].tour->delivered);
  return logs;
}

/// Runs the total-order (or replicated-state-machine) scenario and evaluates
/// ring legality, recovery time, total order, and quiescence.
inline RunReport runToUrb(const Config& cfg) {
  World w(cfg);
  RunReport r;
  r.config = cfg;
  scheduleAppTraffic(w);

  std::vector<StepFlags> flags;
  flags.reserve(cfg.budget);
  w.run([&](World& world) {
    StepFlags f;
    f.step = world.clock;
    f.cycle = world.cycles;
    f.legal = checkDef4Legal(world);
    f.pred = checkPred(world);
    for (ProcessId i : world.correctSet()) {
      f.activeSlots = std::max(f.activeSlots, world.procs[i].tour->activeSlots());
    }
    flags.push_back(f);
    return false;
  });

  uint64_t injectionStep = w.injected ? cfg.faults.transient.at : 0;

  // legality point: one step past the last observed violation
  std::optional<size_t> lastViolation;
  for (size_t i = 0; i < flags.size(); ++i) {
    if (!flags[i].legal) lastViolation = i;
  }
  uint64_t legalityStep = injectionStep;
  bool legalityReached = true;
  if (lastViolation) {
    legalityStep = flags[*lastViolation].step + 1;
    legalityReached = *lastViolation + 1 < flags.size();
    uint64_t base = w.cyclesAtInjection;
    uint64_t at = flags[*lastViolation].cycle;
    r.legalityCycles = at >= base ? at - base + 1 : 1;
  }

  if (w.injected) {
    r.add("legality_reached", legalityReached);
    r.add("legality_cycles", r.legalityCycles <= 6,
          "reached after " + std::to_string(r.legalityCycles) + " cycles");
  } else {
    bool alwaysLegal = !lastViolation.has_value();
    r.add("def4_every_step", alwaysLegal,
          alwaysLegal ? "" : "violation at step " + std::to_string(flags[*lastViolation].step));
  }

  // slot economy in the legal suffix
  {
    int maxActive = 0;
    for (const StepFlags& f : flags) {
      if (f.step >= legalityStep) maxActive = std::max(maxActive, f.activeSlots);
    }
    r.add("slot_economy", maxActive <= 2, "max active slots " + std::to_string(maxActive));
  }

  // total order over the post-synchronization suffix: the first slot decided
  // after the legality point realigns per-process consumption, so comparison
  // starts strictly after it
  {
    auto logs = collectLogs(w);
    uint64_t syncSlot = 0;
    if (w.injected) {
      for (const auto& log : logs) {
        uint64_t first = UINT64_MAX;
        for (const DeliveryRecord& d : log) {
          if (d.step >= legalityStep) {
            first = d.slotSeq;
            break;
          }
        }
        if (first != UINT64_MAX) syncSlot = std::max(syncSlot, first);
      }
    }
    std::vector<std::vector<DeliveryRecord>> suffixes;
    for (const auto& log : logs) {
      std::vector<DeliveryRecord> s;
      for (const DeliveryRecord& d : log) {
        if (d.slotSeq > syncSlot) s.push_back(d);
      }
      suffixes.push_back(std::move(s));
    }
    r.add("total_order", checkTotalOrder(suffixes));

    // validity + per-process integrity over the same suffix
    std::set<uint64_t> broadcastHashes;
    for (const auto& [origin, step, payload] : w.appBroadcastLog) {
      broadcastHashes.insert(fnv1a64(payload));
    }
    bool valid = true;
    bool noDup = true;
    for (const auto& s : suffixes) {
      std::set<std::pair<ProcessId, uint64_t>> seen;
      for (const DeliveryRecord& d : s) {
        if (!broadcastHashes.count(d.payloadHash)) valid = false;
        if (!seen.insert({d.origin, d.seq}).second) noDup = false;
      }
    }
    r.add("delivery_validity", valid);
    r.add("delivery_integrity", noDup);
  }

  // quiescence: pred holds soon after the cutoff and persists
  if (cfg.cutoff > 0) {
    std::optional<size_t> lastPredViolation;
    std::optional<uint64_t> cycleAtCutoff;
    for (size_t i = 0; i < flags.size(); ++i) {
      if (flags[i].step < cfg.cutoff) continue;
      if (!cycleAtCutoff) cycleAtCutoff = flags[i].cycle;
      if (!flags[i].pred) lastPredViolation = i;
    }
    bool predHolds = !flags.empty() && flags.back().pred;
    uint64_t predCycles = 0;
    if (lastPredViolation && cycleAtCutoff) {
      predCycles = flags[*lastPredViolation].cycle >= *cycleAtCutoff
                       ? flags[*lastPredViolation].cycle - *cycleAtCutoff + 1
                       : 1;
    }
    r.quiescenceCycles = predCycles;
    r.add("pred_holds", predHolds);
    r.add("pred_within_cycles", predCycles <= 3,
          "pred settled after " + std::to_string(predCycles) + " cycles");
  }

  // replicated state machines must end with identical snapshots
  if (cfg.scenario == Scenario::Rsm) {
    std::optional<std::string> snap;
    bool equal = true;
    for (ProcessId i : w.correctSet()) {
      auto* node = dynamic_cast<RsmNode*>(w.procs[i].tour.get());
      std::string s = node->automaton.snapshot();
      if (!snap) snap = s;
      else if (*snap != s) equal = false;
    }
    r.add("snapshots_equal", equal);
  }

  r.outcome = r.pass ? "legal" : "violation";
  fillCommonMetrics(r, w);
  return r;
}

inline RunReport runScenario(const Config& cfg) {
  switch (cfg.scenario) {
    case Scenario::Mv: return runMv(cfg);
    case Scenario::Mrt: return runMrt(cfg, cfg.faults.transient.kind == "none");
    case Scenario::ToUrb:
    case Scenario::Rsm: return runToUrb(cfg);
  }
  return RunReport{};
}

// ---------------------------------------------------------------------------
// Campaigns
// ---------------------------------------------------------------------------

inline std::vector<RunReport> runCampaign(const std::vector<Config>& cfgs, unsigned threads = 0) {
  if (threads == 0) {
    threads = std::thread::hardware_concurrency();
    if (threads == 0) threads = 2;
  }
  std::vector<RunReport> reports(cfgs.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= cfgs.size()) return;
      reports[i] = runScenario(cfgs[i]);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return reports;
}

/// Derives benign-fault settings (crashes, drop/dup/reorder) from the seed so
/// a campaign covers the whole allowed fault envelope.
inline void deriveBenignFaults(Config& cfg, bool withCrashes = true) {
  std::mt19937_64 setup(cfg.seed ^ 0xfa017edull);
  cfg.faults.dropProb = static_cast<double>(setup() % 26) / 100.0;
  cfg.faults.dupProb = static_cast<double>(setup() % 16) / 100.0;
  cfg.faults.reorder = true;
  if (withCrashes) {
    int maxCrashes = (cfg.n - 1) / 2;
    int crashes = static_cast<int>(setup() % static_cast<uint64_t>(maxCrashes + 1));
    std::vector<ProcessId> victims;
    for (ProcessId i = 0; i < cfg.n; ++i) victims.push_back(i);
    for (int c = 0; c < crashes; ++c) {
      size_t pick = setup() % victims.size();
      ProcessId victim = victims[pick];
      victims.erase(victims.begin() + pick);
      cfg.faults.crashSteps[victim] = setup() % (cfg.budget / 3 + 1);
    }
  }
}

}  // namespace stabcon
