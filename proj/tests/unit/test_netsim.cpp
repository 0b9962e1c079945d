#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "reslab/netsim.hpp"

using namespace reslab;
using namespace reslab::net;

namespace {

struct Seen {
  Round round;
  Round receipt;
  PartyId sender;
  Bytes payload;
};

// Every party logs its inbox; validators broadcast "<id>@<round>" on the
// listed rounds, clients too when chatty.
struct Recorder {
  std::map<PartyId, std::vector<Seen>> inbox;
  std::map<PartyId, std::vector<Round>> stepped;
};

class EchoNode : public ClientNode {
 public:
  EchoNode(PartyId self, std::shared_ptr<Recorder> rec, std::set<Round> send_at)
      : self_(self), rec_(std::move(rec)), send_at_(std::move(send_at)) {}

  void step(Round r, std::span<const Received> inbox, Outbox& out) override {
    rec_->stepped[self_].push_back(r);
    for (const auto& m : inbox) rec_->inbox[self_].push_back({r, m.receipt, m.msg.sender, m.msg.bytes()});
    if (send_at_.count(r)) out.broadcast(self_.str() + "@" + std::to_string(r));
  }
  const Log& output() const override { return log_; }

 private:
  PartyId self_;
  std::shared_ptr<Recorder> rec_;
  std::set<Round> send_at_;
  Log log_;
};

class EchoProtocol : public Protocol {
 public:
  EchoProtocol(std::shared_ptr<Recorder> rec, std::set<Round> validator_rounds, std::set<Round> client_rounds = {})
      : rec_(std::move(rec)), validator_rounds_(std::move(validator_rounds)), client_rounds_(std::move(client_rounds)) {}

  std::string name() const override { return "echo"; }
  std::unique_ptr<Node> make_validator(const NodeContext& ctx) const override {
    return std::make_unique<EchoNode>(ctx.self, rec_, validator_rounds_);
  }
  std::unique_ptr<ClientNode> make_client(const NodeContext& ctx) const override {
    return std::make_unique<EchoNode>(ctx.self, rec_, client_rounds_);
  }
  Round latency() const override { return 1; }

 private:
  std::shared_ptr<Recorder> rec_;
  std::set<Round> validator_rounds_;
  std::set<Round> client_rounds_;
};

class RandomDelay : public Adversary {
 public:
  explicit RandomDelay(std::uint64_t seed) : rng_(seed) {}
  Round honest_delay(const Message&, PartyId, Round delta) override {
    return std::uniform_int_distribution<Round>(1, delta)(rng_);
  }

 private:
  std::mt19937_64 rng_;
};

WorldSpec spec(std::uint32_t n, std::uint32_t clients, Round delta, Round horizon) {
  WorldSpec s;
  s.n = n;
  s.clients = clients;
  s.delta = delta;
  s.horizon = horizon;
  return s;
}

std::optional<Round> first_receipt(const Recorder& rec, PartyId who, const Bytes& payload) {
  auto it = rec.inbox.find(who);
  if (it == rec.inbox.end()) return std::nullopt;
  for (const auto& s : it->second) {
    if (s.payload == payload) return s.receipt;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("honest broadcast reaches every honest party within delta") {
  auto rec = std::make_shared<Recorder>();
  EchoProtocol proto(rec, {3});
  RandomDelay adv(9);
  World w(spec(4, 2, 2, 10), proto, &adv);
  w.run();
  for (std::uint32_t v = 0; v < 4; ++v) {
    const Bytes payload = "v" + std::to_string(v) + "@3";
    for (PartyId to : {PartyId::validator(0), PartyId::validator(1), PartyId::validator(2), PartyId::validator(3),
                       PartyId::client(0), PartyId::client(1)}) {
      if (to == PartyId::validator(v)) continue;
      auto got = first_receipt(*rec, to, payload);
      REQUIRE(got);
      CHECK(*got >= 4);
      CHECK(*got <= 5);
    }
  }
}

TEST_CASE("delay bound holds on every honest message of a trace") {
  auto rec = std::make_shared<Recorder>();
  std::set<Round> rounds;
  for (Round r = 0; r < 40; ++r) rounds.insert(r);
  EchoProtocol proto(rec, rounds);
  RandomDelay adv(4);
  World w(spec(5, 2, 3, 45), proto, &adv);
  w.run();
  std::size_t checked = 0;
  for (const auto& [who, seen] : rec->inbox) {
    for (const auto& s : seen) {
      const auto at = s.payload.find('@');
      const Round sent = std::stoull(s.payload.substr(at + 1));
      CHECK(s.receipt >= sent + 1);
      CHECK(s.receipt <= sent + 3);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("silent clients may not send") {
  auto rec = std::make_shared<Recorder>();
  EchoProtocol proto(rec, {}, {2});
  World w(spec(3, 1, 1, 5), proto, nullptr);
  CHECK_THROWS_AS(w.run(), SilentClientSend);

  auto spec2 = spec(3, 1, 1, 5);
  spec2.models.client_interactivity = ClientInteractivity::Communicating;
  World ok(spec2, proto, nullptr);
  auto t = ok.run();
  CHECK(t.client_sends() == 1);
}

TEST_CASE("adversary observes honest messages in the round they are sent") {
  struct Watcher : Adversary {
    std::vector<std::pair<Round, Bytes>> seen;
    void on_round(AdversaryApi& api) override {
      for (const auto& m : api.observed()) seen.emplace_back(api.round(), m.bytes());
    }
  };
  auto rec = std::make_shared<Recorder>();
  EchoProtocol proto(rec, {3});
  Watcher adv;
  auto s = spec(4, 1, 2, 8);
  s.corrupted = {false, false, false, true};
  World w(s, proto, &adv);
  w.run();
  CHECK(std::count(adv.seen.begin(), adv.seen.end(), std::make_pair(Round{3}, Bytes("v0@3"))) == 1);
  // Corrupted validators do not run honest code.
  CHECK(rec->stepped.count(PartyId::validator(3)) == 0);
}

TEST_CASE("messages that arrive during sleep are stamped with the wake round") {
  auto rec = std::make_shared<Recorder>();
  EchoProtocol proto(rec, {2});
  auto s = spec(3, 1, 2, 12);
  s.models.validator_model = ValidatorModel::Sleepy;
  for (Round r = 2; r <= 9; ++r) s.schedule.set_validator(r, 1, false, 3);
  World w(s, proto, nullptr);
  w.run();
  auto got = first_receipt(*rec, PartyId::validator(1), "v0@2");
  REQUIRE(got);
  CHECK(*got == 10);
  const auto& steps = rec->stepped[PartyId::validator(1)];
  CHECK(std::find(steps.begin(), steps.end(), Round{7}) == steps.end());
  // v0 and v2 both broadcast at round 2; both wait in the buffer.
  REQUIRE(rec->inbox[PartyId::validator(1)].size() == 2);
  for (const auto& seen : rec->inbox[PartyId::validator(1)]) CHECK(seen.receipt == 10);
}

TEST_CASE("an asleep validator produces nothing in that round") {
  auto rec = std::make_shared<Recorder>();
  EchoProtocol proto(rec, {7});
  auto s = spec(4, 1, 1, 10);
  s.models.validator_model = ValidatorModel::Sleepy;
  s.schedule.set_validator(7, 3, false, 4);
  World w(s, proto, nullptr);
  auto t = w.run();
  for (const auto& e : t.events()) {
    if (e.kind == EventKind::Send) CHECK_FALSE((e.round == 7 && e.from == PartyId::validator(3)));
  }
  CHECK_FALSE(first_receipt(*rec, PartyId::client(0), "v3@7"));
  CHECK(first_receipt(*rec, PartyId::client(0), "v2@7"));
}

TEST_CASE("buffered arrival times are invisible after waking") {
  // Two worlds differ only in when messages reach the sleeping validator.
  struct Skew : Adversary {
    Round gap;
    explicit Skew(Round g) : gap(g) {}
    Round honest_delay(const Message&, PartyId to, Round) override { return to == PartyId::validator(2) ? gap : 1; }
  };
  std::vector<std::vector<Seen>> views;
  for (Round gap : {1, 3}) {
    auto rec = std::make_shared<Recorder>();
    EchoProtocol proto(rec, {0, 1, 2});
    auto s = spec(3, 1, 3, 12);
    s.models.validator_model = ValidatorModel::Sleepy;
    for (Round r = 1; r <= 8; ++r) s.schedule.set_validator(r, 2, false, 3);
    Skew adv(gap);
    World w(s, proto, &adv);
    w.run();
    views.push_back(rec->inbox[PartyId::validator(2)]);
  }
  REQUIRE(views[0].size() == views[1].size());
  for (std::size_t i = 0; i < views[0].size(); ++i) {
    CHECK(views[0][i].receipt == 9);
    CHECK(views[0][i].receipt == views[1][i].receipt);
    CHECK(views[0][i].payload == views[1][i].payload);
  }
}

TEST_CASE("same-round deliveries are ordered by sender then digest") {
  auto rec = std::make_shared<Recorder>();
  EchoProtocol proto(rec, {0});
  World w(spec(4, 1, 1, 3), proto, nullptr);
  w.run();
  const auto& seen = rec->inbox[PartyId::client(0)];
  REQUIRE(seen.size() == 4);
  for (std::size_t i = 1; i < seen.size(); ++i) CHECK(seen[i - 1].sender < seen[i].sender);

  Received a{Message::make(PartyId::validator(1), "x", 0), 1};
  Received b{Message::make(PartyId::validator(1), "y", 0), 1};
  CHECK(delivery_order(a, b) == (a.msg.digest < b.msg.digest));
  Received c{Message::make(PartyId::validator(0), "z", 0), 1};
  CHECK(delivery_order(c, a));
}

TEST_CASE("awake party with nothing pending gets an empty inbox") {
  auto rec = std::make_shared<Recorder>();
  EchoProtocol proto(rec, {});
  World w(spec(2, 1, 1, 3), proto, nullptr);
  CHECK(w.deliver_inbox(PartyId::validator(0), 0).empty());
}

TEST_CASE("advancing past the horizon fails") {
  auto rec = std::make_shared<Recorder>();
  EchoProtocol proto(rec, {});
  World w(spec(2, 1, 1, 2), proto, nullptr);
  w.execute_round();
  CHECK(w.advance_round() == 1);
  w.execute_round();
  CHECK(w.advance_round() == 2);
  CHECK_THROWS_AS(w.advance_round(), HorizonExceeded);
}

TEST_CASE("environment inputs arrive at the scheduled round") {
  auto rec = std::make_shared<Recorder>();
  EchoProtocol proto(rec, {});
  auto s = spec(3, 1, 1, 5);
  s.injections.push_back({2, 55, {PartyId::validator(1)}});
  World w(s, proto, nullptr);
  auto t = w.run();
  const auto& seen = rec->inbox[PartyId::validator(1)];
  REQUIRE(seen.size() == 1);
  CHECK(seen[0].receipt == 2);
  CHECK(decode_tx(seen[0].payload) == TxId{55});
  REQUIRE(t.receipts().size() == 1);
  CHECK(t.receipts()[0].recipient == PartyId::validator(1));
}

TEST_CASE("illegal adversary actions are rejected") {
  struct Cheater : Adversary {
    int mode;
    explicit Cheater(int m) : mode(m) {}
    void on_round(AdversaryApi& api) override {
      if (api.round() != 1) return;
      if (mode == 0) api.send(PartyId::validator(0), "x", PartyId::client(0), 3);
      if (mode == 1) api.send(PartyId::validator(3), "x", PartyId::client(0), 1);
      if (mode == 2) api.key(0);
      if (mode == 3) api.send(PartyId::client(0), "x", PartyId::validator(1), 2);
    }
  };
  auto rec = std::make_shared<Recorder>();
  EchoProtocol proto(rec, {});
  auto s = spec(4, 1, 1, 4);
  s.corrupted = {false, false, false, true};
  Cheater honest_claim(0), same_round(1), steal_key(2), spoof(3);
  CHECK_THROWS_AS(World(s, proto, &honest_claim).run(), IllegalAction);
  CHECK_THROWS_AS(World(s, proto, &same_round).run(), IllegalAction);
  CHECK_THROWS_AS(World(s, proto, &steal_key).run(), crypto::ForgeryAttempt);
  auto t = World(s, proto, &spoof).run();
  CHECK(t.client_sends() == 0);
  CHECK(first_receipt(*rec, PartyId::validator(1), "x") == Round{2});
}

TEST_CASE("always-on models reject sleep schedules") {
  auto rec = std::make_shared<Recorder>();
  EchoProtocol proto(rec, {});
  auto s = spec(3, 1, 1, 4);
  s.schedule.set_validator(2, 0, false, 3);
  CHECK_THROWS_AS(World(s, proto, nullptr).run(), IllegalAction);
}
