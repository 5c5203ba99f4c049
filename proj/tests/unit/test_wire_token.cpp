/*
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing,
 *  software distributed under the License is distributed on an "AS
 *  IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either
 *  express or implied.  See the License for the specific language
 *  governing permissions and limitations under the License.
 */


#include <doctest.h>

#include <cstring>

#include "dbrs/graph.hpp"
#include "dbrs/token_ring.hpp"
#include "dbrs/transport.hpp"
#include "dbrs/wire.hpp"
#include "ring_model.hpp"

using namespace dbrs;

TEST_CASE("envelope layout is bit exact") {
  const Envelope env{EnvelopeKind::bp_message, 7, 0x01020304u, 9, {0.25, 0.75}, {}};
  const auto bytes = encode_envelope(env);
  REQUIRE(bytes.size() == kEnvelopeHeaderBytes + 2 * 8);
  CHECK(std::memcmp(bytes.data(), "DBRS", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 7);  // little-endian u32
  CHECK(bytes[10] == 0x04);
  CHECK(bytes[13] == 0x01);
  CHECK(bytes[14] == 9);
  CHECK(bytes[22] == 2);  // payload length
  double first = 0.0;
  std::memcpy(&first, bytes.data() + kEnvelopeHeaderBytes, 8);
  CHECK(first == 0.25);
}

TEST_CASE("envelopes round trip") {
  Envelope token{EnvelopeKind::token, 2, 0, 5, {}, TokenState{1, 40, 39, 7}};
  Envelope report{EnvelopeKind::belief_report, 12, 0, 6, {0.1, 0.9, 4.0}, {}};
  Envelope shutdown{EnvelopeKind::shutdown, 0, 2, 1, {}, {}};
  std::vector<std::uint8_t> batch;
  for (const auto& e : {token, report, shutdown}) encode_envelope(e, batch);
  CHECK(encode_envelope(token).size() == kEnvelopeHeaderBytes + kTokenBodyBytes);
  const auto back = decode_batch(batch);
  REQUIRE(back.size() == 3);
  CHECK(back[0] == token);
  CHECK(back[1] == report);
  CHECK(back[2] == shutdown);
}

TEST_CASE("malformed envelopes") {
  auto bytes = encode_envelope(Envelope{EnvelopeKind::bp_message, 1, 2, 3, {0.5, 0.5}, {}});
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_batch(truncated), WireError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_batch(bad_magic), WireError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(decode_batch(bad_version), WireError);
  auto bad_kind = bytes;
  bad_kind[5] = 9;
  CHECK_THROWS_AS(decode_batch(bad_kind), WireError);
}

TEST_CASE("token ring node") {
  SUBCASE("single worker needs two clean self-cycles") {
    TokenRingNode solo(0, 1);
    TokenState t;
    TokenDecision d = solo.pass(t, 0, 0);  // opens the first cycle; dirty at start
    CHECK_FALSE(d.terminate);
    d = solo.pass(d.token, 0, 0);
    CHECK_FALSE(d.terminate);
    CHECK(d.token.clean_cycles == 1);
    d = solo.pass(d.token, 0, 0);
    CHECK(d.terminate);
  }
  SUBCASE("work resets the count") {
    TokenRingNode solo(0, 1);
    TokenDecision d = solo.pass({}, 0, 0);
    d = solo.pass(d.token, 0, 0);
    CHECK(d.token.clean_cycles == 1);
    solo.mark_dirty();
    d = solo.pass(d.token, 0, 0);
    CHECK(d.token.clean_cycles == 0);
    CHECK_FALSE(d.terminate);
  }
  SUBCASE("mismatched tallies keep the ring going") {
    TokenRingNode a(0, 2), b(1, 2);
    TokenDecision d = a.pass({}, 1, 0);
    for (int cycle = 0; cycle < 5; ++cycle) {
      d = b.pass(d.token, 0, 0);  // message from 0 never received
      d = a.pass(d.token, 1, 0);
      CHECK_FALSE(d.terminate);
    }
    // delivery: b is dirty, counts match after a full clean double cycle
    b.mark_dirty();
    d = b.pass(d.token, 0, 1);
    d = a.pass(d.token, 1, 0);
    CHECK_FALSE(d.terminate);
    d = b.pass(d.token, 0, 1);
    d = a.pass(d.token, 1, 0);
    CHECK_FALSE(d.terminate);
    d = b.pass(d.token, 0, 1);
    d = a.pass(d.token, 1, 0);
    CHECK(d.terminate);
  }
  CHECK_THROWS_AS(TokenRingNode(3, 3), ArgumentError);
}

TEST_CASE("scripted transport keeps per-channel FIFO order") {
  ScriptedTransport t(3);
  t.send(0, 1, {1});
  t.send(0, 1, {2});
  t.send(2, 1, {3});
  CHECK(t.in_flight() == 3);
  CHECK(t.busy_channels().size() == 2);
  t.deliver(2, 1);
  t.deliver(0, 1);
  CHECK(t.poll(1)->bytes == std::vector<std::uint8_t>{3});
  CHECK(t.poll(1)->bytes == std::vector<std::uint8_t>{1});
  CHECK_FALSE(t.poll(1).has_value());
  t.deliver_all();
  CHECK(t.poll(1)->bytes == std::vector<std::uint8_t>{2});
  CHECK(t.in_flight() == 0);
  CHECK_THROWS_AS(t.deliver(0, 1), TransportError);
  CHECK_THROWS_AS(t.send(0, 5, {}), TransportError);
  CHECK(t.bytes_sent(0) == 2);
  CHECK(t.packets_sent(2) == 1);
}

TEST_CASE("in-process transport") {
  InProcessTransport t(2);
  t.send(1, 0, {9, 9});
  CHECK(t.in_flight() == 1);
  t.wait(0, std::chrono::microseconds(10));
  const auto p = t.poll(0);
  REQUIRE(p.has_value());
  CHECK(p->from == 1);
  CHECK(t.in_flight() == 0);
  CHECK(t.bytes_sent(1) == 2);
}

TEST_CASE("ring model check") {
  for (const auto& scenario : dbrs::testing::ring_scenarios()) {
    dbrs::testing::RingModelChecker checker(scenario, 45);
    const auto r = checker.run();
    INFO(scenario.name << ": " << r.first_violation);
    CHECK(r.violations == 0);
    CHECK(r.deadlocks == 0);
    CHECK(r.declarations > 0);
  }
}
