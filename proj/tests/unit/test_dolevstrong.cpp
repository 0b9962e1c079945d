#include <doctest.h>

#include "reslab/dolevstrong.hpp"
#include "reslab/harness.hpp"

using namespace reslab;
using namespace reslab::ds;

namespace {

struct Fixture {
  crypto::Registry reg{9, std::vector<bool>(4, false)};
  crypto::RandomOracle oracle{9};

  crypto::SigningKey key(ValidatorId v) { return crypto::SigningKey(&reg, crypto::Principal::validator(v), v); }
  net::NodeContext validator_ctx(ValidatorId v) { return {PartyId::validator(v), 4, 2, 2, &reg, key(v), &oracle}; }
  net::NodeContext client_ctx() { return {PartyId::client(0), 4, 2, 2, &reg, {}, &oracle}; }
};

// Instance 1 is period 0 with leader 1; it starts at round 0.
SigChain two_deep(Fixture& fx, const Value& v) { return extend_chain(start_chain(1, v, fx.key(1)), fx.key(3)); }

std::vector<net::Received> one(PartyId from, Bytes payload, Round r) {
  return {net::Received{net::Message::make(from, std::move(payload), r), r}};
}

}  // namespace

TEST_CASE("instance numbering and period timing") {
  Params p{4, 2};
  CHECK(p.period() == 16);
  CHECK(p.latency() == 32);
  CHECK(p.instance(3, 2) == 14);
  CHECK(p.start_of(14) == 48);
  CHECK(p.leader_of(14) == 2);
}

TEST_CASE("chain deadlines depend on depth and role") {
  Fixture fx;
  auto c = two_deep(fx, {1, 2});
  // k=2, delta=2: clients until 3 delta, validators until 4 delta.
  CHECK(validate_chain(c, 6, Role::Client, 0, 2, 4, fx.reg));
  CHECK_FALSE(validate_chain(c, 7, Role::Client, 0, 2, 4, fx.reg));
  CHECK(validate_chain(c, 8, Role::Validator, 0, 2, 4, fx.reg));
  CHECK_FALSE(validate_chain(c, 9, Role::Validator, 0, 2, 4, fx.reg));
  // Not before the instance starts.
  CHECK_FALSE(validate_chain(c, 3, Role::Client, 4, 2, 4, fx.reg));

  auto leader_only = start_chain(1, {1}, fx.key(1));
  CHECK(validate_chain(leader_only, 2, Role::Client, 0, 2, 4, fx.reg));
  CHECK_FALSE(validate_chain(leader_only, 3, Role::Client, 0, 2, 4, fx.reg));
}

TEST_CASE("malformed chains are rejected") {
  Fixture fx;
  auto c = two_deep(fx, {1});

  auto dup = extend_chain(c, fx.key(3));
  CHECK_FALSE(validate_chain(dup, 1, Role::Validator, 0, 2, 4, fx.reg));

  auto tampered = c;
  tampered.sigs[1].tag ^= 1;
  CHECK_FALSE(validate_chain(tampered, 1, Role::Validator, 0, 2, 4, fx.reg));

  // The first signature must be the instance leader's.
  auto wrong_leader = extend_chain(start_chain(1, {1}, fx.key(2)), fx.key(3));
  CHECK_FALSE(validate_chain(wrong_leader, 1, Role::Validator, 0, 2, 4, fx.reg));

  auto outsider = c;
  outsider.sigs[1].signer = 7;
  CHECK_FALSE(validate_chain(outsider, 1, Role::Validator, 0, 2, 4, fx.reg));

  SigChain empty{1, 1, value_digest({1}), {}};
  CHECK_FALSE(validate_chain(empty, 1, Role::Validator, 0, 2, 4, fx.reg));

  // Each layer covers the ones below it, so swapping a value digest breaks every tag.
  auto swapped = c;
  swapped.value_digest = value_digest({2});
  CHECK_FALSE(validate_chain(swapped, 1, Role::Validator, 0, 2, 4, fx.reg));
}

TEST_CASE("chain messages round-trip and check the value digest") {
  Fixture fx;
  auto c = two_deep(fx, {4, 5});
  auto b = encode_chain_message(c, {4, 5});
  auto back = decode_chain_message(b);
  REQUIRE(back);
  CHECK(back->first.encode() == c.encode());
  CHECK(back->second == Value{4, 5});

  CHECK_FALSE(decode_chain_message(encode_chain_message(c, {4, 6})));
  CHECK_FALSE(decode_chain_message(b.substr(0, b.size() - 1)));
  CHECK_FALSE(decode_chain_message(net::encode_tx(4)));
}

TEST_CASE("bg_output needs exactly one candidate") {
  CHECK_FALSE(bg_output({}));
  CHECK(bg_output({{value_digest({1}), Value{1}}}) == Value{1});
  CHECK_FALSE(bg_output({{value_digest({1}), Value{1}}, {value_digest({2}), Value{2}}}));
  CHECK(bg_output({{value_digest({}), Value{}}}) == Value{});
}

TEST_CASE("validators propose at period starts and extend valid chains once") {
  Fixture fx;
  Validator v(Params{4, 2}, fx.validator_ctx(2));
  net::Outbox out;
  v.step(0, one(PartyId::environment(), net::encode_tx(8), 0), out);
  // Leader of instance 2 proposes what it knows at round 0.
  REQUIRE(out.items().size() == 1);
  auto mine = decode_chain_message(out.items()[0]);
  REQUIRE(mine);
  CHECK(mine->first.id == 2);
  CHECK(mine->first.k() == 1);
  CHECK(mine->second == Value{8});
  out.clear();

  auto c1 = start_chain(1, {3}, fx.key(1));
  v.step(1, one(PartyId::validator(1), encode_chain_message(c1, {3}), 1), out);
  REQUIRE(out.items().size() == 1);
  auto ext = decode_chain_message(out.items()[0]);
  REQUIRE(ext);
  CHECK(ext->first.k() == 2);
  CHECK(ext->first.sigs[1].signer == 2);
  CHECK(validate_chain(ext->first, 4, Role::Validator, 0, 2, 4, fx.reg));
  out.clear();

  // Same value again, or a chain it already signed: nothing.
  v.step(2, one(PartyId::validator(3), encode_chain_message(extend_chain(c1, fx.key(3)), {3}), 2), out);
  v.step(2, one(PartyId::validator(3), encode_chain_message(ext->first, {3}), 2), out);
  CHECK(out.empty());

  // A second value is relayed, a third is not.
  auto c2 = start_chain(1, {4}, fx.key(1));
  auto c3 = start_chain(1, {5}, fx.key(1));
  v.step(2, one(PartyId::validator(1), encode_chain_message(c2, {4}), 2), out);
  v.step(2, one(PartyId::validator(1), encode_chain_message(c3, {5}), 2), out);
  CHECK(out.items().size() == 1);
  CHECK(v.signed_values(1) == 2);
  CHECK(v.signed_values(2) == 1);
}

TEST_CASE("clients relay valid chains and keep every candidate value") {
  Fixture fx;
  Client c(Params{4, 2}, fx.client_ctx());
  net::Outbox out;
  auto a = start_chain(1, {3}, fx.key(1));
  auto b = start_chain(1, {4}, fx.key(1));
  c.step(1, one(PartyId::validator(1), encode_chain_message(a, {3}), 1), out);
  CHECK(out.items().size() == 1);
  // Too late for a 1-chain at round 3.
  c.step(3, one(PartyId::validator(1), encode_chain_message(b, {4}), 3), out);
  CHECK(c.candidates(1).size() == 1);
  c.step(4, one(PartyId::validator(3), encode_chain_message(extend_chain(b, fx.key(3)), {4}), 4), out);
  CHECK(c.candidates(1).size() == 2);
  CHECK(out.items().size() == 2);

  // End of period 0: two candidates mean the default (nothing) for instance 1.
  c.step(16, {}, out);
  CHECK(c.output().empty());
  CHECK(c.candidates(1).empty());
}

TEST_CASE("client appends unique candidates in leader order") {
  Fixture fx;
  Client c(Params{4, 2}, fx.client_ctx());
  net::Outbox out;
  std::vector<net::Received> inbox;
  for (ValidatorId l : {3, 0}) {
    auto ch = start_chain(l, {100u + l}, fx.key(l));
    inbox.push_back({net::Message::make(PartyId::validator(l), encode_chain_message(ch, {100u + l}), 1), 1});
  }
  c.step(1, inbox, out);
  c.step(15, {}, out);
  CHECK(c.output().empty());
  c.step(16, {}, out);
  CHECK(c.output() == Log({100, 103}));
}

TEST_CASE("Dolev-Strong stays safe and live with all but one validator corrupted") {
  auto cfg = harness::ScenarioConfig::parse(
      "protocol=ds\nn=4\nf=3\ndelta=2\nhorizon=200\nclients=3\nclient_mode=communicating\nseed=1\n");
  auto res = harness::run(cfg);
  CHECK(res.verdict.safe());
  CHECK(res.verdict.live());
  CHECK(res.latency == 32);
}
