#include <algorithm>
#include <cmath>

#include "reslab/adversary.hpp"
#include "reslab/gadgets.hpp"
#include "reslab/internal_protocol.hpp"

namespace reslab::adv {

namespace {

constexpr TxId kForgedBase = 0xF000000000000000ULL;
constexpr std::size_t kHistory = 256;

}  // namespace

std::optional<std::size_t> certifiable_quorum(const net::Protocol& p) {
  if (const auto* ip = dynamic_cast<const sync::InternalProtocol*>(&p)) return ip->params().q;
  if (const auto* gp = dynamic_cast<const gadgets::GadgetProtocol*>(&p)) {
    if (const auto* ip = dynamic_cast<const sync::InternalProtocol*>(&gp->engine())) return ip->params().q;
  }
  return std::nullopt;
}

std::pair<std::uint32_t, std::uint32_t> beta_split(std::uint32_t n, Fraction beta) {
  std::pair<std::uint32_t, std::uint32_t> best{0, n};
  double best_err = 2.0;
  bool best_sleeps = false;
  for (std::uint32_t awake = n; awake >= 1; --awake) {
    for (std::uint32_t f = 0; f < awake; ++f) {
      const double err = std::abs(static_cast<double>(f) / awake - beta.value());
      const bool sleeps = awake < n;
      const bool better = err < best_err - 1e-12 ||
                          (std::abs(err - best_err) <= 1e-12 &&
                           ((sleeps && !best_sleeps) || (sleeps == best_sleeps && f > best.first)));
      if (better) {
        best = {f, awake};
        best_err = err;
        best_sleeps = sleeps;
      }
    }
  }
  return best;
}

void Fuzz::on_start(net::World& world) {
  world_ = &world;
  std::vector<ValidatorId> members;
  for (std::uint32_t v = 0; v < world.spec().n; ++v) {
    if (world.corrupted(static_cast<ValidatorId>(v))) members.push_back(static_cast<ValidatorId>(v));
  }
  puppets_ = std::make_unique<PuppetSet>(world, members, true);
}

Round Fuzz::honest_delay(const net::Message&, PartyId, Round delta) {
  return std::uniform_int_distribution<Round>(1, delta)(rng_);
}

std::vector<PartyId> Fuzz::honest_parties(const net::AdversaryApi& api) const {
  std::vector<PartyId> out;
  for (std::uint32_t v = 0; v < api.n(); ++v) {
    if (!api.corrupted(static_cast<ValidatorId>(v))) out.push_back(PartyId::validator(v));
  }
  for (std::uint32_t c = 0; c < api.clients(); ++c) out.push_back(PartyId::client(c));
  return out;
}

void Fuzz::on_round(net::AdversaryApi& api) {
  const Round r = api.round();
  const Round delta = api.delta();
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto delay = [&] { return r + std::uniform_int_distribution<Round>(1, delta)(rng_); };

  for (const auto& m : api.observed()) {
    if (m.sender.kind == PartyKind::Environment) continue;
    if (history_.size() == kHistory) history_.erase(history_.begin());
    history_.push_back(m);
  }

  const auto targets = honest_parties(api);
  for (auto& [from, payload] : puppets_->step(r, api.observed())) {
    std::optional<Bytes> alt;
    if (coin(rng_) < options_.equivocate) {
      alt = world_->protocol().equivocate(payload, api.key(static_cast<ValidatorId>(from.index)), rng_());
    }
    if (alt) {
      auto shuffled = targets;
      std::shuffle(shuffled.begin(), shuffled.end(), rng_);
      for (std::size_t i = 0; i < shuffled.size(); ++i) {
        api.send(from, i % 2 == 0 ? payload : *alt, shuffled[i], delay());
      }
      continue;
    }
    for (const auto& to : targets) {
      if (coin(rng_) < options_.withhold) continue;
      api.send(from, payload, to, delay());
    }
  }

  if (!history_.empty() && api.clients() > 0 && coin(rng_) < options_.spoof) {
    const auto& src = history_[std::uniform_int_distribution<std::size_t>(0, history_.size() - 1)(rng_)];
    auto claim = PartyId::client(std::uniform_int_distribution<std::uint32_t>(0, api.clients() - 1)(rng_));
    auto to = targets[std::uniform_int_distribution<std::size_t>(0, targets.size() - 1)(rng_)];
    Bytes payload = src.bytes();
    if (!payload.empty() && coin(rng_) < 0.5) {
      auto at = std::uniform_int_distribution<std::size_t>(0, payload.size() - 1)(rng_);
      payload[at] = static_cast<char>(payload[at] ^ 0x5a);
    }
    if (to != claim) api.send(claim, std::move(payload), to, delay());
  }

  if (options_.forge_q > 0) forge(api);
}

void Fuzz::forge(net::AdversaryApi& api) {
  std::vector<crypto::SigningKey> keys;
  for (std::uint32_t v = 0; v < api.n(); ++v) {
    if (api.corrupted(static_cast<ValidatorId>(v))) keys.push_back(api.key(static_cast<ValidatorId>(v)));
  }
  if (keys.empty()) return;
  const Round r = api.round();
  // Ghost ids never enter an honest log, so any accepted one conflicts with
  // the first honest commit.
  const Log ghost({kForgedBase | r});
  auto cert = sync::forge_certificate(r, ghost, keys);
  ++forge_attempts_;
  if (sync::consume(cert, world_->registry(), options_.forge_q).accepted()) ++accepted_forgeries_;
  if (api.clients() == 0) return;
  auto to = PartyId::client(static_cast<std::uint32_t>(r % api.clients()));
  const auto claim = PartyId::validator(keys.front().signer());
  api.send(claim, sync::encode_certificate_message(cert), to, r + 1);
  api.send(claim, gadgets::encode_transcript(cert), to, r + 1);
}

}  // namespace reslab::adv
