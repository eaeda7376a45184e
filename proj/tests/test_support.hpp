#pragma once

#include <utility>
#include <vector>

#include "stabcon/stabcon.hpp"

namespace stabcon::testutil {

/// Captures protocol output without a full world: sends, ledger submissions,
/// and a fixed trusted set.
class MockEnv final : public Env {
 public:
  std::vector<std::pair<ProcessId, Packet>> sent;
  std::vector<BcSubmission> submissions;
  std::vector<ProcessId> trustedSet;

  explicit MockEnv(int n) {
    for (ProcessId i = 0; i < n; ++i) trustedSet.push_back(i);
  }

  void send(ProcessId dst, Packet p) override { sent.emplace_back(dst, std::move(p)); }
  const std::vector<ProcessId>& trusted() override { return trustedSet; }
  void bcSubmit(BcSubmission s) override { submissions.push_back(std::move(s)); }
  void trace(TraceKind, int64_t, int64_t, int64_t, int64_t, uint64_t) override {}

  size_t countSent(PacketKind kind) const {
    size_t c = 0;
    for (const auto& [dst, p] : sent) {
      if (p.kind == kind) ++c;
    }
    return c;
  }
};

/// Applies queued submissions against a first-write-wins ledger and pushes
/// the decisions back into the nodes, mimicking the simulator's service loop.
inline void settleLedger(std::vector<MockEnv*> envs, std::vector<BcNode*> nodes,
                         std::map<std::pair<uint64_t, int>, bool>& ledger) {
  for (size_t i = 0; i < envs.size(); ++i) {
    for (const BcSubmission& s : envs[i]->submissions) {
      for (auto [k, b] : s.entries) {
        ledger.emplace(std::make_pair(s.tag, k), b);
      }
    }
  }
  for (size_t i = 0; i < envs.size(); ++i) {
    for (const BcSubmission& s : envs[i]->submissions) {
      for (auto [k, b] : s.entries) {
        nodes[i]->onDecide(*envs[i], s.tag, k, ledger.at({s.tag, k}));
      }
    }
    envs[i]->submissions.clear();
  }
}

}  // namespace stabcon::testutil
