#include <random>

#include "doctest.h"
#include "stabcon/core.hpp"

using namespace stabcon;

TEST_CASE("valueEquals: sentinels only equal themselves") {
  CHECK(valueEquals(ConsensusResult::bot(), ConsensusResult::bot()));
  CHECK(valueEquals(ConsensusResult::decided("a"), ConsensusResult::decided("a")));
  CHECK_FALSE(valueEquals(ConsensusResult::decided("a"), ConsensusResult::transientError()));
  CHECK_FALSE(valueEquals(ConsensusResult::bot(), ConsensusResult::transientError()));
  CHECK_FALSE(valueEquals(ConsensusResult::decided("a"), ConsensusResult::decided("b")));
  CHECK_FALSE(valueEquals(ConsensusResult::bot(), ConsensusResult::decided("")));
}

namespace {

Message randomMessage(std::mt19937_64& rng) {
  Message m;
  switch (rng() % 3) {
    case 0: {
      m.kind = MsgKind::Proposal;
      if (rng() % 4 != 0) {
        std::string v;
        size_t len = rng() % 12;
        for (size_t i = 0; i < len; ++i) v.push_back(static_cast<char>(rng() % 256));
        m.value = v;
      }
      break;
    }
    case 1:
      m.kind = MsgKind::Sync;
      m.sn = rng();
      break;
    default: {
      m.kind = MsgKind::SyncAck;
      m.sn = rng();
      m.seq = rng();
      m.obsS = rng();
      size_t n = rng() % 6;
      m.ready.r.resize(n);
      for (size_t i = 0; i < n; ++i) m.ready.r[i] = rng();
      break;
    }
  }
  m.sender = static_cast<ProcessId>(rng() % 8);
  m.dest = static_cast<ProcessId>(rng() % 8) - 1;
  m.tag = rng();
  return m;
}

}  // namespace

TEST_CASE("message encoding round-trips") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 500; ++i) {
    Message m = randomMessage(rng);
    auto back = decodeMessage(encodeMessage(m));
    REQUIRE(back.has_value());
    CHECK(*back == m);
  }
}

TEST_CASE("packet encoding round-trips") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    Packet p;
    switch (rng() % 3) {
      case 0:
        p.kind = PacketKind::UrbData;
        p.origin = static_cast<ProcessId>(rng() % 5);
        p.stream = static_cast<uint8_t>(rng() % 2);
        p.seq = rng() % 1000;
        p.body = encodeMessage(randomMessage(rng));
        break;
      case 1:
        p.kind = PacketKind::UrbAck;
        p.origin = static_cast<ProcessId>(rng() % 5);
        p.stream = static_cast<uint8_t>(rng() % 2);
        p.seq = rng() % 1000;
        break;
      default:
        p.kind = PacketKind::Direct;
        p.msg = randomMessage(rng);
        break;
    }
    auto back = decodePacket(encodePacket(p));
    REQUIRE(back.has_value());
    CHECK(back->kind == p.kind);
    if (p.kind == PacketKind::UrbData) {
      CHECK(back->origin == p.origin);
      CHECK(back->seq == p.seq);
      CHECK(back->body == p.body);
    }
    if (p.kind == PacketKind::Direct) CHECK(back->msg == p.msg);
  }
}

TEST_CASE("decode rejects truncated and garbage input") {
  Message m;
  m.kind = MsgKind::SyncAck;
  m.ready.r = {1, 2, 3};
  std::string enc = encodeMessage(m);
  CHECK_FALSE(decodeMessage(enc.substr(0, enc.size() - 1)).has_value());
  CHECK_FALSE(decodeMessage("").has_value());
  std::string junk = enc;
  junk[0] = 99;  // unknown kind byte
  CHECK_FALSE(decodeMessage(junk).has_value());
}

TEST_CASE("Bot payload and empty decided payload stay distinguishable") {
  Message withBot;
  withBot.kind = MsgKind::Proposal;
  withBot.value.reset();
  Message withEmpty;
  withEmpty.kind = MsgKind::Proposal;
  withEmpty.value = "";
  auto a = decodeMessage(encodeMessage(withBot));
  auto b = decodeMessage(encodeMessage(withEmpty));
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  CHECK_FALSE(a->value.has_value());
  CHECK(b->value.has_value());
}
