#include "reslab/gadgets.hpp"

#include <stdexcept>

namespace reslab::gadgets {

namespace {

std::optional<SignedItem> decode_signed(const Bytes& b, MsgTag expect) {
  if (b.size() != 1 + 8 + 2 + 8 || static_cast<MsgTag>(static_cast<std::uint8_t>(b[0])) != expect) return std::nullopt;
  ByteReader r(b);
  r.u8();
  SignedItem s;
  s.value = r.u64();
  s.signer = r.u16();
  s.tag = r.u64();
  return s;
}

Bytes encode_signed(MsgTag tag, std::uint64_t value, ValidatorId signer, std::uint64_t sig) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(tag)).u64(value).u16(signer).u64(sig);
  return w.take();
}

bool verifies(const net::NodeContext& ctx, std::uint32_t n, ValidatorId signer, std::uint64_t digest,
              std::uint64_t tag) {
  if (signer >= n) return false;
  crypto::Signature sig{PartyId::validator(signer), digest, tag};
  return ctx.registry->verify_digest(sig.signer, digest, sig);
}

}  // namespace

std::string to_string(Kind k) {
  switch (k) {
    case Kind::Freeze: return "frz";
    case Kind::LiveQ: return "liveq";
    case Kind::LiveStar: return "livestar";
    case Kind::LivePhi: return "livephi";
  }
  return "?";
}

std::optional<Kind> parse_kind(std::string_view s) {
  if (s == "frz") return Kind::Freeze;
  if (s == "liveq") return Kind::LiveQ;
  if (s == "livestar") return Kind::LiveStar;
  if (s == "livephi") return Kind::LivePhi;
  return std::nullopt;
}

std::uint64_t tx_sig_digest(TxId tx) { return hash_combine(0x74787369ULL, tx); }
std::uint64_t heartbeat_digest(std::uint64_t ell) { return hash_combine(0x68626561ULL, ell); }

Bytes encode_tx_sig(TxId tx, ValidatorId signer, std::uint64_t tag) {
  return encode_signed(MsgTag::TxSig, tx, signer, tag);
}

Bytes encode_heartbeat(std::uint64_t ell, ValidatorId signer, std::uint64_t tag) {
  return encode_signed(MsgTag::Heartbeat, ell, signer, tag);
}

Bytes encode_transcript(const sync::Certificate& cert) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(MsgTag::Transcript)).raw(cert.encode());
  return w.take();
}

std::optional<SignedItem> decode_tx_sig(const Bytes& b) { return decode_signed(b, MsgTag::TxSig); }
std::optional<SignedItem> decode_heartbeat(const Bytes& b) { return decode_signed(b, MsgTag::Heartbeat); }

bool LivenessQueue::add(TxId tx, Round round) {
  if (!ids_.insert(tx).second) return false;
  entries_.emplace(round, tx);
  return true;
}

Log append_queue(const Log& internal, const LivenessQueue& queue, Round r, Round u_int) {
  Log out = internal;
  for (const auto& [added, tx] : queue.entries()) {
    if (added + u_int > r) break;
    out.append(tx);
  }
  return out;
}

void HeartbeatTally::tx_signature(TxId tx, ValidatorId signer) {
  tx_[tx].insert(signer);
}

void HeartbeatTally::heartbeat(std::uint64_t ell, ValidatorId signer) { heartbeats_[ell].insert(signer); }

std::size_t HeartbeatTally::tx_signers(TxId tx) const {
  auto it = tx_.find(tx);
  return it == tx_.end() ? 0 : it->second.size();
}

std::size_t HeartbeatTally::awake_estimate(std::uint64_t ell, TxId tx) const {
  std::set<ValidatorId> all;
  if (auto it = tx_.find(tx); it != tx_.end()) all = it->second;
  if (auto it = heartbeats_.find(ell); it != heartbeats_.end()) all.insert(it->second.begin(), it->second.end());
  return all.size();
}

std::vector<TxId> HeartbeatTally::qualifying(std::uint64_t ell, Fraction phi) const {
  std::vector<TxId> out;
  for (const auto& [tx, signers] : tx_) {
    const auto total = static_cast<std::int64_t>(awake_estimate(ell, tx));
    if (phi.reached_by(static_cast<std::int64_t>(signers.size()), total)) out.push_back(tx);
  }
  return out;
}

Round latency(const Params& p) {
  switch (p.kind) {
    case Kind::Freeze: return p.u_int + p.delta;
    case Kind::LiveQ:
    case Kind::LiveStar: return p.u_int + 2 * p.delta;
    case Kind::LivePhi: return p.u_int + 3 * p.delta;
  }
  return p.u_int;
}

GadgetValidator::GadgetValidator(Params params, net::NodeContext ctx, std::unique_ptr<net::Node> inner)
    : params_(params), ctx_(std::move(ctx)), inner_(std::move(inner)) {}

void GadgetValidator::step(Round r, std::span<const net::Received> inbox, net::Outbox& out) {
  inner_->step(r, inbox, out);
  if (params_.kind != Kind::LiveQ && params_.kind != Kind::LivePhi) return;
  const auto self = static_cast<ValidatorId>(ctx_.self.index);
  for (const auto& m : inbox) {
    auto tx = net::decode_tx(m.msg.bytes());
    if (!tx || !seen_.insert(*tx).second) continue;
    if (params_.kind == Kind::LiveQ) {
      out.broadcast(encode_tx_sig(*tx, self, ctx_.key.sign_digest(tx_sig_digest(*tx)).tag));
    } else {
      unsigned_.push_back(*tx);
    }
  }
  if (params_.kind == Kind::LivePhi && r % params_.delta == 0) {
    for (auto tx : unsigned_) out.broadcast(encode_tx_sig(tx, self, ctx_.key.sign_digest(tx_sig_digest(tx)).tag));
    unsigned_.clear();
    const std::uint64_t ell = r / params_.delta;
    out.broadcast(encode_heartbeat(ell, self, ctx_.key.sign_digest(heartbeat_digest(ell)).tag));
  }
}

FreezeClient::FreezeClient(Params params, net::NodeContext ctx, sync::Params engine)
    : params_(params), engine_(engine), ctx_(ctx), core_(engine, ctx) {}

void FreezeClient::observe(const Log& log, Round r) {
  const auto digest = log.digest();
  if (m_digests_.insert(digest).second) {
    m_.push_back(log);
    if (m_is_chain_) {
      if (is_prefix(m_top_, log)) {
        m_top_ = log;
      } else if (!is_prefix(log, m_top_)) {
        m_is_chain_ = false;
      }
    }
  }
  if (log.size() > output_.size()) candidates_.emplace(digest, std::make_pair(log, r));
}

bool FreezeClient::consistent_with_observed(const Log& l) const {
  if (m_is_chain_) return is_consistent(l, m_top_);
  for (const auto& x : m_) {
    if (!is_consistent(l, x)) return false;
  }
  return true;
}

void FreezeClient::step(Round r, std::span<const net::Received> inbox, net::Outbox& out) {
  core_.step(r, inbox);
  for (const auto& m : inbox) {
    const auto& b = m.msg.bytes();
    if (m.msg.sender.kind == PartyKind::Environment) {
      if (auto tx = net::decode_tx(b)) out.broadcast(net::encode_tx(*tx));
      continue;
    }
    if (b.empty() || static_cast<MsgTag>(static_cast<std::uint8_t>(b[0])) != MsgTag::Transcript) continue;
    auto cert = sync::Certificate::decode(std::string_view(b).substr(1));
    if (!cert) continue;
    auto res = sync::consume(*cert, *ctx_.registry, engine_.q);
    if (!res.accepted()) continue;
    observe(*res.log, r);
    core_.offer(*cert);
    if (relayed_.insert(m.msg.digest).second) out.broadcast(b);
  }
  for (const auto& cert : core_.take_accepted()) observe(cert.log, r);

  const bool changed = !(core_.log() == last_internal_);
  if ((changed || r % params_.delta == 0) && !core_.witness().genesis()) {
    auto bytes = encode_transcript(core_.witness());
    relayed_.insert(stable_hash(bytes));
    out.broadcast(std::move(bytes));
  }
  last_internal_ = core_.log();

  const Log* best = nullptr;
  for (auto it = candidates_.begin(); it != candidates_.end();) {
    const auto& [log, seen] = it->second;
    if (log.size() <= output_.size() || !is_prefix(output_, log)) {
      it = candidates_.erase(it);
      continue;
    }
    if (seen + params_.delta <= r && consistent_with_observed(log) && (!best || log.size() > best->size())) best = &log;
    ++it;
  }
  if (best) output_ = *best;
}

QueueClient::QueueClient(Params params, net::NodeContext ctx, std::unique_ptr<net::EngineClient> inner)
    : params_(params), ctx_(std::move(ctx)), inner_(std::move(inner)) {}

void QueueClient::step(Round r, std::span<const net::Received> inbox, net::Outbox& out) {
  inner_->step(r, inbox);
  for (const auto& m : inbox) {
    const auto& b = m.msg.bytes();
    switch (params_.kind) {
      case Kind::LiveQ:
        if (auto s = decode_tx_sig(b); s && verifies(ctx_, params_.n, s->signer, tx_sig_digest(s->value), s->tag)) {
          auto& signers = signers_[s->value];
          signers.insert(s->signer);
          if (signers.size() >= params_.q) queue_.add(s->value, r);
        }
        break;
      case Kind::LiveStar:
        if (auto tx = net::decode_tx(b); tx && gossiped_.insert(*tx).second) {
          queue_.add(*tx, r);
          out.broadcast(net::encode_tx(*tx));
        }
        break;
      case Kind::LivePhi:
        if (auto s = decode_tx_sig(b); s && verifies(ctx_, params_.n, s->signer, tx_sig_digest(s->value), s->tag)) {
          tally_.tx_signature(s->value, s->signer);
        } else if (auto h = decode_heartbeat(b);
                   h && verifies(ctx_, params_.n, h->signer, heartbeat_digest(h->value), h->tag)) {
          tally_.heartbeat(h->value, h->signer);
        }
        break;
      case Kind::Freeze:
        break;
    }
  }
  if (params_.kind == Kind::LivePhi) {
    const std::uint64_t ell = r / params_.delta;
    if (!last_tick_ || ell > *last_tick_) {
      last_tick_ = ell;
      for (auto tx : tally_.qualifying(ell - 1, params_.phi)) queue_.add(tx, r);
    }
  }
  output_ = append_queue(inner_->log(), queue_, r, params_.u_int);
}

GadgetProtocol::GadgetProtocol(Params params, std::shared_ptr<const net::Engine> engine)
    : params_(params), engine_(std::move(engine)) {
  if (!engine_) throw std::invalid_argument("gadget needs an engine");
  if (params_.kind == Kind::Freeze && !dynamic_cast<const sync::InternalProtocol*>(engine_.get())) {
    throw std::invalid_argument("freezing gadget needs the certifiable internal protocol");
  }
}

std::unique_ptr<net::Node> GadgetProtocol::make_validator(const net::NodeContext& ctx) const {
  return std::make_unique<GadgetValidator>(params_, ctx, engine_->make_validator(ctx));
}

std::unique_ptr<net::ClientNode> GadgetProtocol::make_client(const net::NodeContext& ctx) const {
  if (params_.kind == Kind::Freeze) {
    const auto& engine = dynamic_cast<const sync::InternalProtocol&>(*engine_);
    return std::make_unique<FreezeClient>(params_, ctx, engine.params());
  }
  return std::make_unique<QueueClient>(params_, ctx, engine_->make_engine_client(ctx));
}

}  // namespace reslab::gadgets
