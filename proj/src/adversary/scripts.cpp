#include <algorithm>

#include "reslab/adversary.hpp"
#include "reslab/gadgets.hpp"
#include "reslab/goldfish.hpp"
#include "reslab/internal_protocol.hpp"

namespace reslab::adv {

namespace {

constexpr TxId kSplitA = 0x5B000001ULL;
constexpr TxId kSplitB = 0x5B000002ULL;
// The replayed world's transaction sorts first so a late joiner that learns
// both in one round orders them differently from the early clients.
constexpr TxId kWorldOne = 0x4F000002ULL;
constexpr TxId kWorldTwo = 0x4F000001ULL;
constexpr TxId kGhost = 0x6E000000ULL;

std::vector<ValidatorId> corrupted_of(const net::World& world) {
  std::vector<ValidatorId> out;
  for (std::uint32_t v = 0; v < world.spec().n; ++v) {
    if (world.corrupted(static_cast<ValidatorId>(v))) out.push_back(static_cast<ValidatorId>(v));
  }
  return out;
}

void corrupt(net::WorldSpec& spec, const std::vector<ValidatorId>& set) {
  spec.corrupted.assign(spec.n, false);
  for (auto v : set) spec.corrupted.at(v) = true;
}

std::vector<ValidatorId> range(std::uint32_t from, std::uint32_t to) {
  std::vector<ValidatorId> out;
  for (auto v = from; v < to; ++v) out.push_back(static_cast<ValidatorId>(v));
  return out;
}

const sync::InternalProtocol* internal_of(const net::Protocol& p) {
  if (const auto* ip = dynamic_cast<const sync::InternalProtocol*>(&p)) return ip;
  if (const auto* gp = dynamic_cast<const gadgets::GadgetProtocol*>(&p)) {
    return dynamic_cast<const sync::InternalProtocol*>(&gp->engine());
  }
  return nullptr;
}

bool is_freeze(const net::Protocol& p) {
  const auto* gp = dynamic_cast<const gadgets::GadgetProtocol*>(&p);
  return gp && gp->params().kind == gadgets::Kind::Freeze;
}

// Corrupted validators forge commit certificates for logs of their choosing.
bool forges_certificates(const AttackSetup& s) {
  auto q = certifiable_quorum(*s.protocol);
  return q && s.f >= *q;
}

void send_all(net::AdversaryApi& api, PartyId from, const Bytes& payload, Round at) {
  for (std::uint32_t v = 0; v < api.n(); ++v) {
    if (!api.corrupted(static_cast<ValidatorId>(v))) api.send(from, payload, PartyId::validator(v), at);
  }
  for (std::uint32_t c = 0; c < api.clients(); ++c) {
    if (PartyId::client(c) != from) api.send(from, payload, PartyId::client(c), at);
  }
}

class SplitBrain : public AttackScript {
 public:
  using AttackScript::AttackScript;
  std::string name() const override { return "split_brain"; }

  void configure(net::WorldSpec& spec) const override {
    if (setup_.f > spec.n) throw AttackError("split_brain: f exceeds n");
    corrupt(spec, range(0, setup_.f));
    spec.clients = std::max<std::uint32_t>(spec.clients, 2);
  }

  Expectation expected() const override {
    // Silent clients of a certifiable engine cannot tell two forged histories apart.
    if (forges_certificates(setup_) && !is_freeze(*setup_.protocol) && !setup_.models.communicating()) {
      return {false, std::nullopt};
    }
    return {true, std::nullopt};
  }

  void on_start(net::World& world) override {
    const auto members = corrupted_of(world);
    if (members.empty()) return;
    left_ = std::make_unique<PuppetSet>(world, members, false);
    right_ = std::make_unique<PuppetSet>(world, members, false);
    left_->inject(kSplitA, 0);
    right_->inject(kSplitB, 0);
  }

  void on_round(net::AdversaryApi& api) override {
    if (!left_) return;
    const Round r = api.round();
    for (auto& [from, payload] : left_->step(r, {})) api.send(from, payload, PartyId::client(0), r + 1);
    for (auto& [from, payload] : right_->step(r, {})) api.send(from, payload, PartyId::client(1), r + 1);
  }

 private:
  std::unique_ptr<PuppetSet> left_;
  std::unique_ptr<PuppetSet> right_;
};

class FourWorlds : public AttackScript {
 public:
  using AttackScript::AttackScript;
  std::string name() const override { return "four_worlds"; }

  Round late_join() const { return std::stoull(param("late_join", "0")); }

  void configure(net::WorldSpec& spec) const override {
    const auto half = (spec.n + 1) / 2;
    if (setup_.f != 0 && setup_.f != half) {
      throw AttackError("four_worlds: f must be 0 or " + std::to_string(half));
    }
    if (spec.models.client_sleepiness != ClientSleepiness::Sleepy || !spec.models.communicating()) {
      throw AttackError("four_worlds needs sleepy communicating clients");
    }
    corrupt(spec, range(spec.n - setup_.f, spec.n));
    spec.clients = std::max<std::uint32_t>(spec.clients, 3);
    Round join = late_join();
    if (join == 0) join = spec.horizon / 2;
    for (Round r = 0; r < join && r <= spec.horizon; ++r) spec.schedule.set_client(r, 2, false, spec.clients);
    net::TxInjection inj{1, kWorldOne, {PartyId::client(0)}};
    for (std::uint32_t v = 0; v < spec.n - setup_.f; ++v) inj.recipients.push_back(PartyId::validator(v));
    spec.injections.push_back(inj);
  }

  Expectation expected() const override {
    if (setup_.f == 0) return {true, true};
    if (is_freeze(*setup_.protocol)) return {true, false};
    const auto* gp = dynamic_cast<const gadgets::GadgetProtocol*>(setup_.protocol);
    if (gp && gp->params().kind == gadgets::Kind::LiveStar) return {false, std::nullopt};
    return {};
  }

  void on_start(net::World& world) override {
    const auto members = corrupted_of(world);
    if (members.empty()) return;
    // World two: the corrupted side runs honestly with its own client and
    // transaction, ignoring everyone else.
    shadow_ = std::make_unique<PuppetSet>(world, members, false, std::vector<std::uint32_t>{1});
    shadow_->inject(kWorldTwo, 1);
  }

  void on_round(net::AdversaryApi& api) override {
    if (!shadow_) return;
    const Round r = api.round();
    for (auto& [from, payload] : shadow_->step(r, {})) api.send(from, payload, PartyId::client(2), r + 1);
  }

 private:
  std::unique_ptr<PuppetSet> shadow_;
};

class SleepyDa : public AttackScript {
 public:
  using AttackScript::AttackScript;
  std::string name() const override { return "sleepy_da_attack"; }

  Fraction beta() const { return Fraction::parse(param("beta", "1/2")); }

  const goldfish::GoldfishProtocol* target() const {
    if (const auto* g = dynamic_cast<const goldfish::GoldfishProtocol*>(setup_.protocol)) return g;
    if (const auto* gp = dynamic_cast<const gadgets::GadgetProtocol*>(setup_.protocol)) {
      return dynamic_cast<const goldfish::GoldfishProtocol*>(&gp->engine());
    }
    return nullptr;
  }

  void configure(net::WorldSpec& spec) const override {
    if (spec.models.validator_model != ValidatorModel::Sleepy) {
      throw AttackError("sleepy_da_attack needs the sleepy validator model");
    }
    const auto* g = target();
    if (!g) throw AttackError("sleepy_da_attack targets the slot-based sleepy engine");
    const auto [f, awake] = beta_split(spec.n, beta());
    corrupt(spec, range(spec.n - f, spec.n));
    // Honest validators [0, n - awake) sleep except around the slots they lead.
    const std::uint32_t sleepers = spec.n - awake;
    const Round slot = g->params().slot_length();
    crypto::RandomOracle oracle(spec.seed);
    for (Round r = 0; r <= spec.horizon; ++r) {
      const std::uint64_t t = r / slot;
      for (std::uint32_t v = 0; v < sleepers; ++v) {
        const bool leads = goldfish::leader(oracle, t, spec.n) == v || goldfish::leader(oracle, t + 1, spec.n) == v;
        spec.schedule.set_validator(r, v, leads, spec.n);
      }
    }
  }

  Expectation expected() const override {
    const auto* g = target();
    if (!g || g != setup_.protocol) return {};
    const auto phi = g->params().phi;
    const auto b = beta();
    // beta <= 1 - phi  <=>  b.num * phi.den <= (phi.den - phi.num) * b.den
    const bool live = b.num * phi.den <= (phi.den - phi.num) * b.den;
    const bool safe = b.num * phi.den < phi.num * b.den;
    return {safe, live};
  }

  void on_start(net::World& world) override {
    const auto members = corrupted_of(world);
    if (!members.empty()) mimic_ = std::make_unique<PuppetSet>(world, members, false);
  }

  void on_round(net::AdversaryApi& api) override {
    if (!mimic_) return;
    const Round r = api.round();
    for (auto& [from, payload] : mimic_->step(r, {})) send_all(api, from, payload, r + 1);
  }

 private:
  std::unique_ptr<PuppetSet> mimic_;
};

class EquivocateLeader : public AttackScript {
 public:
  using AttackScript::AttackScript;
  std::string name() const override { return "equivocate_leader"; }

  std::uint64_t epoch() const { return std::stoull(param("epoch", "0")); }

  void configure(net::WorldSpec& spec) const override {
    if (setup_.f == 0) throw AttackError("equivocate_leader needs a corrupted leader (f >= 1)");
    if (setup_.f > spec.n) throw AttackError("equivocate_leader: f exceeds n");
    const auto* ip = internal_of(*setup_.protocol);
    if (!ip) throw AttackError("equivocate_leader targets the epoch-based internal protocol");
    std::vector<ValidatorId> set;
    for (std::uint32_t i = 0; i < setup_.f; ++i) set.push_back(static_cast<ValidatorId>((ip->params().leader(epoch()) + i) % spec.n));
    corrupt(spec, set);
  }

  Expectation expected() const override {
    if (forges_certificates(setup_)) return {};
    return {true, std::nullopt};
  }

  void on_start(net::World& world) override {
    puppets_ = std::make_unique<PuppetSet>(world, corrupted_of(world), true);
    params_ = internal_of(world.protocol())->params();
    world_ = &world;
  }

  void on_round(net::AdversaryApi& api) override {
    const Round r = api.round();
    const bool in_epoch = r / params_.epoch_length() == epoch();
    const auto leader = params_.leader(epoch());
    for (auto& [from, payload] : puppets_->step(r, api.observed())) {
      std::optional<Bytes> alt;
      if (in_epoch && from == PartyId::validator(leader)) {
        alt = world_->protocol().equivocate(payload, api.key(leader), r);
      }
      if (!alt) {
        send_all(api, from, payload, r + 1);
        continue;
      }
      // Even-numbered honest parties get the original, odd ones the twin.
      std::uint32_t i = 0;
      for (std::uint32_t v = 0; v < api.n(); ++v) {
        if (api.corrupted(static_cast<ValidatorId>(v))) continue;
        api.send(from, i++ % 2 == 0 ? payload : *alt, PartyId::validator(v), r + 1);
      }
      for (std::uint32_t c = 0; c < api.clients(); ++c) {
        api.send(from, i++ % 2 == 0 ? payload : *alt, PartyId::client(c), r + 1);
      }
    }
  }

 private:
  std::unique_ptr<PuppetSet> puppets_;
  sync::Params params_;
  net::World* world_ = nullptr;
};

class GhostTx : public AttackScript {
 public:
  using AttackScript::AttackScript;
  std::string name() const override { return "ghost_tx"; }

  void configure(net::WorldSpec& spec) const override {
    if (setup_.f == 0) throw AttackError("ghost_tx needs corrupted validators");
    if (setup_.f > spec.n) throw AttackError("ghost_tx: f exceeds n");
    if (!internal_of(*setup_.protocol)) throw AttackError("ghost_tx targets certificate-based protocols");
    corrupt(spec, range(0, setup_.f));
    spec.clients = std::max<std::uint32_t>(spec.clients, 2);
  }

  Expectation expected() const override {
    if (forges_certificates(setup_) && !is_freeze(*setup_.protocol) && !setup_.models.communicating()) {
      return {false, std::nullopt};
    }
    return {true, std::nullopt};
  }

  void on_start(net::World& world) override { params_ = internal_of(world.protocol())->params(); }

  void on_round(net::AdversaryApi& api) override {
    const Round r = api.round();
    if (r % params_.epoch_length() != 0) return;
    std::vector<crypto::SigningKey> keys;
    for (std::uint32_t v = 0; v < api.n(); ++v) {
      if (api.corrupted(static_cast<ValidatorId>(v))) keys.push_back(api.key(static_cast<ValidatorId>(v)));
    }
    // A one-entry log that outranks anything honest at this epoch.
    const Log ghost({kGhost | (r / params_.epoch_length())});
    auto cert = sync::forge_certificate(r, ghost, keys);
    const auto claim = PartyId::validator(keys.front().signer());
    api.send(claim, sync::encode_certificate_message(cert), PartyId::client(0), r + 1);
    api.send(claim, gadgets::encode_transcript(cert), PartyId::client(0), r + 1);
  }

 private:
  sync::Params params_;
};

}  // namespace

std::string AttackScript::param(const std::string& key, const std::string& fallback) const {
  auto it = setup_.params.find(key);
  return it == setup_.params.end() ? fallback : it->second;
}

const std::vector<AttackInfo>& attack_registry() {
  static const std::vector<AttackInfo> registry = {
      {"split_brain", "corrupted validators run two private executions, one shown to each of two clients"},
      {"four_worlds", "corrupted half replays its own execution to a late-joining client (late_join=<round>)"},
      {"sleepy_da_attack", "corrupted validators vote on a private chain while honest ones sleep (beta=<p/q>)"},
      {"equivocate_leader", "a corrupted leader sends two proposals in one epoch (epoch=<index>)"},
      {"ghost_tx", "corrupted validators forge commit certificates for a ghost transaction"},
  };
  return registry;
}

std::unique_ptr<AttackScript> make_attack(const std::string& name, const AttackSetup& setup) {
  if (!setup.protocol) throw AttackError("attack needs a protocol");
  if (name == "split_brain") return std::make_unique<SplitBrain>(setup);
  if (name == "four_worlds") return std::make_unique<FourWorlds>(setup);
  if (name == "sleepy_da_attack") return std::make_unique<SleepyDa>(setup);
  if (name == "equivocate_leader") return std::make_unique<EquivocateLeader>(setup);
  if (name == "ghost_tx") return std::make_unique<GhostTx>(setup);
  throw AttackError("unknown attack '" + name + "'");
}

}  // namespace reslab::adv
