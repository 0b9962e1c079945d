#include <doctest.h>

#include <random>

#include "reslab/goldfish.hpp"
#include "reslab/harness.hpp"

using namespace reslab;
using namespace reslab::goldfish;

namespace {

Block block(std::uint64_t parent, std::uint64_t slot, TxId tx) { return Block{parent, slot, 0, {tx}, 0}; }

Vote vote(std::uint64_t slot, std::uint64_t target, ValidatorId voter) { return Vote{slot, target, voter, 0}; }

// Straight recursive reading of the rule, used as an oracle: weigh each block
// by the votes in its subtree, then walk down from genesis.
std::uint64_t oracle_tip(const BvTree& t, std::uint64_t slot, Rule rule, Fraction phi) {
  auto under = [&](std::uint64_t root, std::uint64_t target) {
    if (target != kGenesis && !t.reachable(target)) return false;
    for (auto id = target;; id = t.block(id)->parent) {
      if (id == root) return true;
      if (id == kGenesis) return false;
    }
  };
  std::int64_t total = 0;
  for (const auto& [voter, v] : t.votes(slot)) total += under(kGenesis, v.block);
  std::uint64_t cur = kGenesis;
  for (;;) {
    std::optional<std::uint64_t> pick;
    std::int64_t pick_w = -1;
    for (const auto& [id, b] : t.blocks()) {
      if (b.parent != cur || !t.reachable(id)) continue;
      std::int64_t w = 0;
      for (const auto& [voter, v] : t.votes(slot)) w += under(id, v.block);
      const bool ok = rule == Rule::MaxChild || (w > 0 && phi.reached_by(w, total));
      if (ok && w > pick_w) {
        pick = id;
        pick_w = w;
      }
    }
    if (!pick) return cur;
    cur = *pick;
  }
}

}  // namespace

TEST_CASE("threshold rule stops where the subtree weight drops below phi") {
  BvTree t;
  auto a = block(kGenesis, 1, 1);
  auto b = block(kGenesis, 1, 2);
  auto a1 = block(a.id(), 2, 3);
  for (const auto& x : {a, b, a1}) CHECK(t.add_block(x));
  t.add_vote(vote(5, a1.id(), 0));
  t.add_vote(vote(5, a1.id(), 1));
  t.add_vote(vote(5, a.id(), 2));
  t.add_vote(vote(5, b.id(), 3));

  auto th = fork_choice(t, 5, Rule::Threshold, Fraction::make(3, 5));
  CHECK(th.total == 4);
  CHECK(th.tip == a.id());
  REQUIRE(th.path.size() == 1);
  CHECK(th.path[0].second == 3);

  auto mc = fork_choice(t, 5, Rule::MaxChild, Fraction::make(3, 5));
  CHECK(mc.tip == a1.id());
  CHECK(mc.weighted_tip == a1.id());

  // At phi = 1/2 the child with 2 of 4 votes passes too.
  CHECK(fork_choice(t, 5, Rule::Threshold, Fraction::make(1, 2)).tip == a1.id());
}

TEST_CASE("fork choice reads only the requested slot's votes") {
  BvTree t;
  auto a = block(kGenesis, 1, 1);
  t.add_block(a);
  CHECK(fork_choice(t, 2, Rule::Threshold, Fraction::make(1, 2)).tip == kGenesis);
  t.add_vote(vote(1, a.id(), 0));
  CHECK(fork_choice(t, 2, Rule::Threshold, Fraction::make(1, 2)).tip == kGenesis);
  CHECK(fork_choice(t, 1, Rule::Threshold, Fraction::make(1, 2)).tip == a.id());
  t.expire_votes_before(2);
  CHECK(t.votes(1).empty());
  CHECK(fork_choice(t, 1, Rule::Threshold, Fraction::make(1, 2)).tip == kGenesis);
}

TEST_CASE("only the first vote per slot and voter counts") {
  BvTree t;
  auto a = block(kGenesis, 1, 1);
  auto b = block(kGenesis, 1, 2);
  t.add_block(a);
  t.add_block(b);
  CHECK(t.add_vote(vote(3, a.id(), 0)));
  CHECK_FALSE(t.add_vote(vote(3, b.id(), 0)));
  CHECK(t.votes(3).at(0).block == a.id());

  BvTree other;
  other.add_vote(vote(3, b.id(), 0));
  other.add_vote(vote(3, b.id(), 1));
  t.merge(other);
  CHECK(t.votes(3).at(0).block == a.id());
  CHECK(t.votes(3).size() == 2);
}

TEST_CASE("orphans and votes for them carry no weight") {
  BvTree t;
  auto a = block(kGenesis, 1, 1);
  auto orphan = block(12345, 2, 2);
  auto stale = block(a.id(), 1, 3);  // slot does not increase
  t.add_block(a);
  t.add_block(orphan);
  t.add_block(stale);
  CHECK(t.reachable(a.id()));
  CHECK_FALSE(t.reachable(orphan.id()));
  CHECK_FALSE(t.reachable(stale.id()));
  t.add_vote(vote(4, orphan.id(), 0));
  t.add_vote(vote(4, stale.id(), 1));
  t.add_vote(vote(4, a.id(), 2));
  auto fc = fork_choice(t, 4, Rule::Threshold, Fraction::make(1, 2));
  CHECK(fc.total == 1);
  CHECK(fc.tip == a.id());
}

TEST_CASE("fork choice matches a recursive oracle on random trees") {
  std::mt19937_64 rng(21);
  for (int iter = 0; iter < 300; ++iter) {
    BvTree t;
    std::vector<std::uint64_t> ids{kGenesis};
    std::vector<std::uint64_t> slots{0};
    const int blocks = std::uniform_int_distribution<int>(1, 12)(rng);
    for (int i = 0; i < blocks; ++i) {
      const auto p = std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng);
      auto b = block(ids[p], slots[p] + 1 + rng() % 2, static_cast<TxId>(iter * 100 + i));
      t.add_block(b);
      ids.push_back(b.id());
      slots.push_back(b.slot);
    }
    const int voters = std::uniform_int_distribution<int>(0, 9)(rng);
    for (int v = 0; v < voters; ++v) {
      t.add_vote(vote(7, ids[rng() % ids.size()], static_cast<ValidatorId>(v)));
    }
    for (auto phi : {Fraction::make(1, 2), Fraction::make(2, 3), Fraction::make(3, 4)}) {
      auto th = fork_choice(t, 7, Rule::Threshold, phi);
      CHECK(th.tip == oracle_tip(t, 7, Rule::Threshold, phi));
      auto mc = fork_choice(t, 7, Rule::MaxChild, phi);
      CHECK(mc.tip == oracle_tip(t, 7, Rule::MaxChild, phi));
      // Above one half the threshold path is a prefix of the heaviest path.
      if (phi.reached_by(2, 3)) CHECK(t.descends(mc.weighted_tip, th.tip));
    }
  }
}

TEST_CASE("chain and descends follow parent links") {
  BvTree t;
  auto a = block(kGenesis, 1, 1);
  auto a1 = block(a.id(), 3, 2);
  auto b = block(kGenesis, 2, 3);
  t.add_block(a);
  t.add_block(a1);
  t.add_block(b);
  auto c = t.chain(a1.id());
  REQUIRE(c.size() == 2);
  CHECK(c[0]->id() == a.id());
  CHECK(c[1]->id() == a1.id());
  CHECK(t.chain(kGenesis).empty());
  CHECK(t.descends(a1.id(), a.id()));
  CHECK(t.descends(a1.id(), kGenesis));
  CHECK_FALSE(t.descends(b.id(), a.id()));
}

TEST_CASE("blocks and votes round-trip through bytes") {
  Block b{77, 4, 3, {5, 6, 7}, 0xfeed};
  ByteWriter w;
  encode_block(w, b);
  auto bytes = w.take();
  ByteReader r(bytes);
  auto back = decode_block(r);
  CHECK(r.done());
  CHECK(back.id() == b.id());
  CHECK(back.tag == b.tag);
  CHECK(back.txs == b.txs);

  Vote v{9, b.id(), 2, 0xbeef};
  ByteWriter wv;
  encode_vote(wv, v);
  auto vb = wv.take();
  ByteReader rv(vb);
  auto vback = decode_vote(rv);
  CHECK(vback.digest() == v.digest());
  CHECK(vback.voter == 2);
  CHECK(vback.tag == 0xbeef);
}

TEST_CASE("block ids never collide with genesis and depend on content") {
  CHECK(block(kGenesis, 1, 1).id() != kGenesis);
  CHECK(block(kGenesis, 1, 1).id() != block(kGenesis, 1, 2).id());
  CHECK(block(kGenesis, 1, 1).id() != block(kGenesis, 2, 1).id());
}

TEST_CASE("leader election is deterministic and covers every validator") {
  crypto::RandomOracle oracle(3);
  std::vector<int> hits(5, 0);
  for (std::uint64_t s = 0; s < 200; ++s) {
    auto l = leader(oracle, s, 5);
    REQUIRE(l < 5);
    CHECK(l == leader(oracle, s, 5));
    ++hits[l];
  }
  for (int h : hits) CHECK(h > 0);
}

TEST_CASE("a party that wakes mid-run joins two slots later") {
  crypto::Registry reg(1, std::vector<bool>(4, false));
  crypto::RandomOracle oracle(1);
  Params p{4, 1, Rule::Threshold, Fraction::make(1, 2), 4};
  CHECK(p.slot_length() == 3);
  CHECK(p.latency() == 18);

  PartyCore always(p, {PartyId::client(0), 4, 1, 1, &reg, {}, &oracle});
  for (Round r = 0; r < 10; ++r) always.note_awake(r);
  CHECK(always.joined(0));
  CHECK(always.joined(3));

  PartyCore late(p, {PartyId::client(1), 4, 1, 1, &reg, {}, &oracle});
  for (Round r = 7; r < 12; ++r) late.note_awake(r);
  // Slot s merges at 3(s-1)+2; a party awake since 7 first saw the merge of slot 2 at round 8.
  CHECK_FALSE(late.joined(2));
  CHECK(late.joined(3));

  // A gap resets the clock.
  late.note_awake(20);
  CHECK_FALSE(late.joined(6));
  CHECK(late.joined(8));
}

TEST_CASE("honest goldfish run is safe and live") {
  auto cfg = harness::ScenarioConfig::parse(
      "protocol=goldfish\nn=4\nphi=1/2\nkappa=4\ndelta=1\nhorizon=90\nadversary=none\ntxs=5\ntx_every=4\n");
  auto res = harness::run(cfg);
  CHECK(res.verdict.safe());
  CHECK(res.verdict.live());
  CHECK(res.latency == 18);
}
