#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "stabcon/core.hpp"
#include "stabcon/trace.hpp"

namespace stabcon {

/// One binary-consensus submission to the shared decision ledger. A batch
/// with more than one entry models piggybacking: all of one process's
/// proposals travel in a single event.
struct BcSubmission {
  uint64_t tag = 0;
  std::vector<std::pair<int, bool>> entries;
  bool reannounce = false;  // stabilizing retransmission, not a fresh invocation
};

/// Per-process view of the harness: outbound transport, the failure-detector
/// oracle, the binary-consensus service, and the trace sink.
class Env {
 public:
  virtual ~Env() = default;
  virtual void send(ProcessId dst, Packet p) = 0;
  virtual const std::vector<ProcessId>& trusted() = 0;  // sorted, includes self
  virtual void bcSubmit(BcSubmission s) = 0;
  virtual void trace(TraceKind k, int64_t a = 0, int64_t b = 0, int64_t c = 0, int64_t d = 0,
                     uint64_t h = 0) = 0;
};

}  // namespace stabcon
