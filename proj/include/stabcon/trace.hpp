#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>

namespace stabcon {

enum class TraceKind : uint8_t {
  UrbBroadcast = 1,
  UrbDeliver,
  UrbAck,
  BcPropose,
  BcDecide,
  MvPropose,
  MvResult,
  MvBcInvoke,
  MvDecide,
  MvTransientError,
  ToBroadcast,
  Sync,
  SyncAck,
  CsPropose,
  CsDecide,
  ToDeliver,
  RsmApply,
  Crash,
  Transient,
};

inline const char* traceKindName(TraceKind k) {
  switch (k) {
    case TraceKind::UrbBroadcast: return "urb_broadcast";
    case TraceKind::UrbDeliver: return "urb_deliver";
    case TraceKind::UrbAck: return "urb_ack";
    case TraceKind::BcPropose: return "bc_propose";
    case TraceKind::BcDecide: return "bc_decide";
    case TraceKind::MvPropose: return "mv_propose";
    case TraceKind::MvResult: return "mv_result";
    case TraceKind::MvBcInvoke: return "mv_bc_invoke";
    case TraceKind::MvDecide: return "mv_decide";
    case TraceKind::MvTransientError: return "mv_transient_error";
    case TraceKind::ToBroadcast: return "to_broadcast";
    case TraceKind::Sync: return "sync";
    case TraceKind::SyncAck: return "sync_ack";
    case TraceKind::CsPropose: return "cs_propose";
    case TraceKind::CsDecide: return "cs_decide";
    case TraceKind::ToDeliver: return "to_deliver";
    case TraceKind::RsmApply: return "rsm_apply";
    case TraceKind::Crash: return "crash";
    case TraceKind::Transient: return "transient";
  }
  return "unknown";
}

inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// One structured trace event. Field meaning depends on the kind; `h` carries
/// a payload hash where a payload exists.
struct TraceRecord {
  uint64_t step = 0;
  TraceKind kind = TraceKind::UrbBroadcast;
  ProcessId pid = -1;
  int64_t a = 0, b = 0, c = 0, d = 0;
  uint64_t h = 0;
};

/// Collects the run's trace hash; optionally mirrors records to an ndjson
/// file with a stable field order so reruns hash and diff cleanly.
class TraceSink {
 public:
  void openFile(const std::string& path) {
    file_.open(path, std::ios::out | std::ios::trunc);
  }

  void record(const TraceRecord& r) {
    uint64_t raw[8] = {r.step,
                       static_cast<uint64_t>(r.kind),
                       static_cast<uint64_t>(static_cast<int64_t>(r.pid)),
                       static_cast<uint64_t>(r.a),
                       static_cast<uint64_t>(r.b),
                       static_cast<uint64_t>(r.c),
                       static_cast<uint64_t>(r.d),
                       r.h};
    hash_ = fnv1a64(std::string_view(reinterpret_cast<const char*>(raw), sizeof(raw)), hash_);
    ++count_;
    if (file_.is_open()) {
      char line[256];
      std::snprintf(line, sizeof(line),
                    "{\"s\":%llu,\"k\":\"%s\",\"p\":%d,\"a\":%lld,\"b\":%lld,\"c\":%lld,"
                    "\"d\":%lld,\"h\":\"%016llx\"}\n",
                    static_cast<unsigned long long>(r.step), traceKindName(r.kind), r.pid,
                    static_cast<long long>(r.a), static_cast<long long>(r.b),
                    static_cast<long long>(r.c), static_cast<long long>(r.d),
                    static_cast<unsigned long long>(r.h));
      file_ << line;
    }
  }

  uint64_t hash() const { return hash_; }
  uint64_t count() const { return count_; }

 private:
  uint64_t hash_ = 0xcbf29ce484222325ull;
  uint64_t count_ = 0;
  std::ofstream file_;
};

}  // namespace stabcon
