#include <doctest.h>

#include <random>
#include <sstream>

#include "reslab/trace.hpp"

using namespace reslab;

namespace {

Log random_log(std::mt19937_64& rng) {
  // Small alphabet so prefixes and conflicts both show up often.
  std::vector<TxId> ids;
  const auto len = std::uniform_int_distribution<int>(0, 4)(rng);
  for (int i = 0; i < len; ++i) ids.push_back(std::uniform_int_distribution<TxId>(1, 3)(rng));
  return Log(ids);
}

Trace two_client_trace(Round horizon) {
  TraceMeta meta;
  meta.n = 4;
  meta.clients = 2;
  meta.horizon = horizon;
  return Trace(meta);
}

}  // namespace

TEST_CASE("is_prefix on small logs") {
  CHECK(is_prefix(Log(), Log({1})));
  CHECK(is_prefix(Log({1}), Log({1})));
  CHECK_FALSE(is_prefix(Log({1, 2}), Log({1, 3})));
  CHECK_FALSE(is_prefix(Log({1, 2}), Log({1})));
}

TEST_CASE("is_consistent on small logs") {
  CHECK(is_consistent(Log({1}), Log({1, 2})));
  CHECK_FALSE(is_consistent(Log({1}), Log({2})));
  CHECK(is_consistent(Log(), Log()));
}

TEST_CASE("is_prefix is a partial order") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    auto a = random_log(rng);
    auto b = random_log(rng);
    auto c = random_log(rng);
    CHECK(is_prefix(a, a));
    if (is_prefix(a, b) && is_prefix(b, a)) CHECK(a == b);
    if (is_prefix(a, b) && is_prefix(b, c)) CHECK(is_prefix(a, c));
    CHECK(is_consistent(a, b) == is_consistent(b, a));
  }
}

TEST_CASE("log append drops duplicates and keeps the first occurrence") {
  Log l({3, 1, 3, 2, 1});
  CHECK(l.entries() == std::vector<TxId>{3, 1, 2});
  CHECK_FALSE(l.append(2));
  CHECK(l.append(9));
  CHECK(l.str() == "[3,1,2,9]");
  CHECK(Log::parse("[3,1,2,9]") == l);
  CHECK(Log::parse("[]").empty());
  CHECK_THROWS_AS(Log::parse("3,1"), std::invalid_argument);
  CHECK(Log({1, 2}).digest() != Log({2, 1}).digest());
}

TEST_CASE("fractions are exact and reduced") {
  auto phi = Fraction::parse("10/16");
  CHECK(phi == Fraction::make(5, 8));
  CHECK(phi.str() == "5/8");
  CHECK(phi.reached_by(5, 8));
  CHECK_FALSE(phi.reached_by(4, 8));
  CHECK(Fraction::parse("3/4").reached_by(3, 4));
  CHECK_FALSE(Fraction::parse("3/4").reached_by(2, 4));
  CHECK(Fraction::parse("1") == Fraction::make(1, 1));
  CHECK_THROWS_AS(Fraction::parse("1/0"), std::invalid_argument);
  CHECK_THROWS_AS(Fraction::parse("x/2"), std::invalid_argument);
}

TEST_CASE("resilience pairs stay in [0,1]") {
  CHECK_NOTHROW(ResiliencePair(0.5, 1.0));
  CHECK_THROWS_AS(ResiliencePair(1.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ResiliencePair(0.0, -0.1), std::invalid_argument);
}

TEST_CASE("party ids print and parse") {
  for (auto p : {PartyId::validator(3), PartyId::client(0), PartyId::environment(), PartyId::everyone()}) {
    auto back = PartyId::parse(p.str());
    REQUIRE(back);
    CHECK(*back == p);
  }
  CHECK_FALSE(PartyId::parse("x1"));
  CHECK_FALSE(PartyId::parse("v"));
}

TEST_CASE("check_safety flags two clients with conflicting logs") {
  auto t = two_client_trace(10);
  t.record_log(0, 5, Log({1}));
  t.record_log(1, 5, Log({2}));
  auto v = check_safety(t);
  CHECK_FALSE(v.safe);
  REQUIRE(v.witness);
  CHECK_FALSE(is_consistent(v.witness->first_log, v.witness->second_log));
  CHECK(witness_replays(t, *v.witness));
}

TEST_CASE("check_safety catches one client contradicting itself") {
  TraceMeta meta;
  meta.n = 4;
  meta.clients = 1;
  meta.horizon = 10;
  Trace t(meta);
  t.record_log(0, 2, Log({1, 2}));
  CHECK(check_safety(t).safe);
  t.record_log(0, 6, Log({1, 3}));
  auto v = check_safety(t);
  CHECK_FALSE(v.safe);
  REQUIRE(v.witness);
  CHECK(v.witness->first == v.witness->second);
}

TEST_CASE("asleep client keeps its previous log") {
  auto t = two_client_trace(10);
  t.record_log(0, 2, Log({1}));
  t.set_client_awake(0, 3, false);
  CHECK(t.log_at(0, 0).empty());
  CHECK(t.log_at(0, 3) == Log({1}));
  CHECK(t.log_at(0, 10) == Log({1}));
}

TEST_CASE("check_liveness reports a starving client") {
  auto t = two_client_trace(20);
  t.add_receipt({7, 0, PartyId::validator(1)});
  auto v = check_liveness(t, 5);
  CHECK_FALSE(v.live);
  REQUIRE(v.witness);
  CHECK(v.witness->tx == 7);
  CHECK(v.witness->receipt == 0);

  t.record_log(0, 5, Log({7}));
  t.record_log(1, 5, Log({7}));
  CHECK(check_liveness(t, 5).live);
}

TEST_CASE("check_liveness ignores transactions only adversary validators saw") {
  TraceMeta meta;
  meta.n = 4;
  meta.clients = 2;
  meta.horizon = 20;
  meta.corrupted = {true, false, false, false};
  Trace t(meta);
  t.add_receipt({7, 0, PartyId::validator(0)});
  CHECK(check_liveness(t, 5).live);
}

TEST_CASE("check_liveness counts client receipts only for communicating clients") {
  TraceMeta meta;
  meta.n = 4;
  meta.clients = 2;
  meta.horizon = 20;
  Trace silent(meta);
  silent.add_receipt({7, 0, PartyId::client(0)});
  CHECK(check_liveness(silent, 5).live);

  meta.models.client_interactivity = ClientInteractivity::Communicating;
  Trace talking(meta);
  talking.add_receipt({7, 0, PartyId::client(0)});
  CHECK_FALSE(check_liveness(talking, 5).live);
}

TEST_CASE("check_liveness skips clients that slept inside the window") {
  auto t = two_client_trace(12);
  t.add_receipt({7, 0, PartyId::validator(1)});
  t.record_log(0, 5, Log({7}));
  // Client 1 naps often enough that it is never awake for a full window of 5.
  for (Round r = 0; r <= 12; r += 3) t.set_client_awake(1, r, false);
  CHECK(check_liveness(t, 5).live);
}

TEST_CASE("verdicts serialize to one line") {
  Verdict v;
  CHECK(v.str() == "safety=SAFE liveness=LIVE");
  v.liveness.live = false;
  v.liveness.witness = LivenessWitness{4, 2, PartyId::client(1), 30};
  CHECK(v.str() == "safety=SAFE liveness=VIOLATION evidence=liveness:tx4@2,c1@30");
}

TEST_CASE("traces round-trip through text") {
  TraceMeta meta;
  meta.n = 3;
  meta.f = 1;
  meta.clients = 2;
  meta.horizon = 6;
  meta.seed = 9;
  meta.protocol = "int";
  meta.corrupted = {false, true, false};
  Trace t(meta);
  t.add_event({0, EventKind::Send, PartyId::validator(0), PartyId::everyone(), 0xabc});
  t.add_event({1, EventKind::Deliver, PartyId::validator(0), PartyId::client(1), 0xabc});
  t.add_event({1, EventKind::Inject, PartyId::client(0), PartyId::validator(2), 0xdef});
  t.record_log(0, 1, Log({1}));
  t.record_log(1, 2, Log({1, 2}));
  t.set_validator_awake(2, 3, false);
  std::stringstream ss;
  t.write(ss);
  auto back = Trace::read(ss);
  CHECK(back.hash() == t.hash());
  CHECK(back.log_at(1, 4) == Log({1, 2}));
  CHECK(back.meta().corrupted == meta.corrupted);
  CHECK(back.meta().protocol == "int");
  CHECK(back.client_sends() == 0);
}

TEST_CASE("beta is f over the smallest awake set") {
  TraceMeta meta;
  meta.n = 8;
  meta.f = 2;
  meta.clients = 1;
  meta.horizon = 4;
  meta.corrupted = {true, true, false, false, false, false, false, false};
  Trace t(meta);
  t.set_validator_awake(5, 2, false);
  t.set_validator_awake(6, 2, false);
  t.set_validator_awake(7, 2, false);
  t.set_validator_awake(7, 3, false);
  CHECK(t.min_awake_validators() == 5);
  CHECK(t.beta() == doctest::Approx(2.0 / 5.0));
}
