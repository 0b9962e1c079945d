#include "reslab/netsim.hpp"

#include <algorithm>

namespace reslab::net {

Message Message::make(PartyId sender, Bytes payload, Round sent_at) {
  auto digest = stable_hash(payload);
  return {sender, std::make_shared<const Bytes>(std::move(payload)), digest, sent_at};
}

Bytes encode_tx(TxId id) {
  ByteWriter w;
  w.u8(kTxTag).u64(id);
  return w.take();
}

std::optional<TxId> decode_tx(const Bytes& payload) {
  if (payload.size() != 9 || static_cast<std::uint8_t>(payload[0]) != kTxTag) return std::nullopt;
  ByteReader r(payload);
  r.u8();
  return r.u64();
}

namespace {

class EngineClientNode : public ClientNode {
 public:
  explicit EngineClientNode(std::unique_ptr<EngineClient> inner) : inner_(std::move(inner)) {}
  void step(Round r, std::span<const Received> inbox, Outbox&) override { inner_->step(r, inbox); }
  const Log& output() const override { return inner_->log(); }

 private:
  std::unique_ptr<EngineClient> inner_;
};

}  // namespace

std::unique_ptr<ClientNode> Engine::make_client(const NodeContext& ctx) const {
  return std::make_unique<EngineClientNode>(make_engine_client(ctx));
}

bool SleepSchedule::validator_awake(Round r, std::uint32_t v) const {
  if (r >= validators.size() || v >= validators[r].size()) return true;
  return validators[r][v] != 0;
}

bool SleepSchedule::client_awake(Round r, std::uint32_t c) const {
  if (r >= clients.size() || c >= clients[r].size()) return true;
  return clients[r][c] != 0;
}

void SleepSchedule::set_validator(Round r, std::uint32_t v, bool awake, std::uint32_t n) {
  if (validators.size() <= r) validators.resize(r + 1);
  if (validators[r].size() < n) validators[r].resize(n, 1);
  validators[r][v] = awake ? 1 : 0;
}

void SleepSchedule::set_client(Round r, std::uint32_t c, bool awake, std::uint32_t count) {
  if (clients.size() <= r) clients.resize(r + 1);
  if (clients[r].size() < count) clients[r].resize(count, 1);
  clients[r][c] = awake ? 1 : 0;
}

bool delivery_order(const Received& a, const Received& b) {
  if (a.msg.sender != b.msg.sender) return a.msg.sender < b.msg.sender;
  return a.msg.digest < b.msg.digest;
}

Round AdversaryApi::round() const { return world_.round(); }
Round AdversaryApi::delta() const { return world_.spec().delta; }
std::uint32_t AdversaryApi::n() const { return world_.spec().n; }
std::uint32_t AdversaryApi::clients() const { return world_.spec().clients; }
bool AdversaryApi::corrupted(ValidatorId v) const { return world_.corrupted(v); }

void AdversaryApi::send(PartyId claim, Bytes payload, PartyId to, Round deliver_at) {
  if (claim.kind == PartyKind::Environment) throw IllegalAction("adversary cannot speak for the environment");
  if (claim.is_validator() && !world_.corrupted(static_cast<ValidatorId>(claim.index))) {
    throw IllegalAction("adversary cannot send as honest " + claim.str());
  }
  auto digest = stable_hash(payload);
  world_.enqueue(claim, std::make_shared<const Bytes>(std::move(payload)), digest, to, deliver_at);
}

void AdversaryApi::send_to_honest(PartyId claim, const Bytes& payload, Round deliver_at) {
  auto shared = std::make_shared<const Bytes>(payload);
  auto digest = stable_hash(payload);
  if (claim.is_validator() && !world_.corrupted(static_cast<ValidatorId>(claim.index))) {
    throw IllegalAction("adversary cannot send as honest " + claim.str());
  }
  for (std::uint32_t v = 0; v < n(); ++v) {
    if (!world_.corrupted(static_cast<ValidatorId>(v))) world_.enqueue(claim, shared, digest, PartyId::validator(v), deliver_at);
  }
  for (std::uint32_t c = 0; c < clients(); ++c) {
    if (claim != PartyId::client(c)) world_.enqueue(claim, shared, digest, PartyId::client(c), deliver_at);
  }
}

crypto::SigningKey AdversaryApi::key(ValidatorId v) const {
  if (!world_.corrupted(v)) throw crypto::ForgeryAttempt("adversary holds no key for honest v" + std::to_string(v));
  return {&world_.registry(), crypto::Principal::adversary(), v};
}

World::World(WorldSpec spec, const Protocol& protocol, Adversary* adversary)
    : spec_(std::move(spec)),
      protocol_(protocol),
      adversary_(adversary),
      registry_(spec_.seed, (spec_.corrupted.resize(spec_.n, false), spec_.corrupted)),
      oracle_(spec_.seed) {
  if (spec_.delta == 0) throw std::invalid_argument("delta must be positive");
  std::stable_sort(spec_.injections.begin(), spec_.injections.end(),
                   [](const TxInjection& a, const TxInjection& b) { return a.round < b.round; });
  TraceMeta meta;
  meta.n = spec_.n;
  meta.f = static_cast<std::uint32_t>(std::count(spec_.corrupted.begin(), spec_.corrupted.end(), true));
  meta.clients = spec_.clients;
  meta.delta = spec_.delta;
  meta.horizon = spec_.horizon;
  meta.seed = spec_.seed;
  meta.models = spec_.models;
  meta.corrupted = spec_.corrupted;
  meta.protocol = protocol_.name();
  meta.declared_latency = protocol_.latency();
  trace_ = Trace(meta);

  validators_.resize(spec_.n);
  for (std::uint32_t v = 0; v < spec_.n; ++v) {
    if (!corrupted(static_cast<ValidatorId>(v))) validators_[v] = protocol_.make_validator(context_for(PartyId::validator(v), false));
  }
  for (std::uint32_t c = 0; c < spec_.clients; ++c) clients_.push_back(protocol_.make_client(context_for(PartyId::client(c), false)));
  validator_inbox_.resize(spec_.n);
  client_inbox_.resize(spec_.clients);
  validator_awake_.assign(spec_.n, true);
  client_awake_.assign(spec_.clients, true);
}

NodeContext World::context_for(PartyId p, bool adversary_owned) {
  NodeContext ctx;
  ctx.self = p;
  ctx.n = spec_.n;
  ctx.clients = spec_.clients;
  ctx.delta = spec_.delta;
  ctx.registry = &registry_;
  ctx.oracle = &oracle_;
  if (p.is_validator()) {
    auto v = static_cast<ValidatorId>(p.index);
    ctx.key = adversary_owned ? crypto::SigningKey(&registry_, crypto::Principal::adversary(), v)
                              : crypto::SigningKey(&registry_, crypto::Principal::validator(v), v);
  }
  return ctx;
}

bool World::awake(PartyId p) const {
  if (p.is_validator()) return p.index < validator_awake_.size() && validator_awake_[p.index];
  if (p.is_client()) return p.index < client_awake_.size() && client_awake_[p.index];
  return true;
}

std::vector<World::Pending>& World::inbox_of(PartyId p) {
  return p.is_validator() ? validator_inbox_.at(p.index) : client_inbox_.at(p.index);
}

void World::broadcast(PartyId sender, Bytes payload, Round r) {
  if (sender.is_client() && !spec_.models.communicating()) {
    throw SilentClientSend("silent client " + sender.str() + " attempted to send");
  }
  if (sender.is_validator() && corrupted(static_cast<ValidatorId>(sender.index))) {
    throw IllegalAction("honest broadcast from corrupted " + sender.str());
  }
  auto msg = Message::make(sender, std::move(payload), r);
  trace_.add_event({r, EventKind::Send, sender, PartyId::everyone(), msg.digest});
  observed_.push_back(msg);
  auto schedule = [&](PartyId to) {
    if (to == sender) return;
    Round gap = adversary_ ? adversary_->honest_delay(msg, to, spec_.delta) : spec_.delta;
    if (gap < 1 || gap > spec_.delta) throw IllegalAction("honest delivery gap outside [1, delta]");
    inbox_of(to).push_back({r + gap, msg});
  };
  for (std::uint32_t v = 0; v < spec_.n; ++v) {
    if (!corrupted(static_cast<ValidatorId>(v))) schedule(PartyId::validator(v));
  }
  for (std::uint32_t c = 0; c < spec_.clients; ++c) schedule(PartyId::client(c));
}

void World::enqueue(PartyId claim, std::shared_ptr<const Bytes> payload, std::uint64_t digest, PartyId to, Round at) {
  if (at <= round_) throw IllegalAction("adversary delivery must be in a later round");
  if (to.kind == PartyKind::Environment) throw IllegalAction("bad recipient");
  if (to.is_validator() && (to.index >= spec_.n || corrupted(static_cast<ValidatorId>(to.index)))) return;
  if (to.is_client() && to.index >= spec_.clients) return;
  Message msg{claim, std::move(payload), digest, round_};
  trace_.add_event({round_, EventKind::Inject, claim, to, digest});
  inbox_of(to).push_back({at, std::move(msg)});
}

std::vector<Received> World::deliver_inbox(PartyId party, Round r) {
  auto& pending = inbox_of(party);
  std::vector<Received> out;
  auto keep = std::stable_partition(pending.begin(), pending.end(), [r](const Pending& p) { return p.at > r; });
  for (auto it = keep; it != pending.end(); ++it) out.push_back({std::move(it->msg), r});
  pending.erase(keep, pending.end());
  std::stable_sort(out.begin(), out.end(), delivery_order);
  for (const auto& rc : out) {
    trace_.add_event({r, EventKind::Deliver, rc.msg.sender, party, rc.msg.digest});
    if (rc.msg.sender.kind == PartyKind::Environment) {
      if (auto tx = decode_tx(rc.msg.bytes())) {
        trace_.add_receipt({*tx, r, party});
        trace_.add_event({r, EventKind::Input, PartyId::environment(), party, *tx});
      }
    }
  }
  return out;
}

void World::begin_round() {
  observed_.clear();
  const bool sleepy_validators = spec_.models.validator_model == ValidatorModel::Sleepy;
  const bool sleepy_clients = spec_.models.client_sleepiness == ClientSleepiness::Sleepy;
  for (std::uint32_t v = 0; v < spec_.n; ++v) {
    bool awake = spec_.schedule.validator_awake(round_, v);
    if (!awake && corrupted(static_cast<ValidatorId>(v))) awake = true;
    if (!awake && !sleepy_validators) throw IllegalAction("validator asleep under always-on model");
    if (awake != validator_awake_[v] || (round_ == 0 && !awake)) {
      trace_.add_event({round_, awake ? EventKind::Wake : EventKind::Sleep, PartyId::validator(v),
                        PartyId::validator(v), 0});
    }
    validator_awake_[v] = awake;
    trace_.set_validator_awake(v, round_, awake);
  }
  for (std::uint32_t c = 0; c < spec_.clients; ++c) {
    bool awake = spec_.schedule.client_awake(round_, c);
    if (!awake && !sleepy_clients) throw IllegalAction("client asleep under always-on model");
    if (awake != client_awake_[c] || (round_ == 0 && !awake)) {
      trace_.add_event({round_, awake ? EventKind::Wake : EventKind::Sleep, PartyId::client(c), PartyId::client(c), 0});
    }
    client_awake_[c] = awake;
    trace_.set_client_awake(c, round_, awake);
  }
  for (const auto& inj : spec_.injections) {
    if (inj.round != round_) continue;
    auto msg = Message::make(PartyId::environment(), encode_tx(inj.tx), round_);
    for (const auto& to : inj.recipients) {
      if (to.is_validator() && corrupted(static_cast<ValidatorId>(to.index))) {
        observed_.push_back(msg);
      } else {
        inbox_of(to).push_back({round_, msg});
      }
    }
  }
}

Round World::advance_round() {
  if (round_ >= spec_.horizon) throw HorizonExceeded("horizon " + std::to_string(spec_.horizon) + " reached");
  ++round_;
  begin_round();
  return round_;
}

void World::execute_round() {
  if (!started_) {
    if (adversary_) adversary_->on_start(*this);
    begin_round();
    started_ = true;
  }
  const Round r = round_;
  Outbox out;
  for (std::uint32_t v = 0; v < spec_.n; ++v) {
    if (!validators_[v] || !validator_awake_[v]) continue;
    auto inbox = deliver_inbox(PartyId::validator(v), r);
    out.clear();
    validators_[v]->step(r, inbox, out);
    for (const auto& item : out.items()) broadcast(PartyId::validator(v), item, r);
  }
  for (std::uint32_t c = 0; c < spec_.clients; ++c) {
    if (!client_awake_[c]) continue;
    auto inbox = deliver_inbox(PartyId::client(c), r);
    out.clear();
    clients_[c]->step(r, inbox, out);
    for (const auto& item : out.items()) broadcast(PartyId::client(c), item, r);
  }
  if (adversary_) {
    AdversaryApi api(*this, observed_);
    adversary_->on_round(api);
  }
  for (std::uint32_t c = 0; c < spec_.clients; ++c) {
    if (client_awake_[c]) trace_.record_log(c, r, clients_[c]->output());
  }
}

Trace World::run() {
  while (true) {
    execute_round();
    if (round_ >= spec_.horizon) break;
    advance_round();
  }
  return std::move(trace_);
}

}  // namespace reslab::net
