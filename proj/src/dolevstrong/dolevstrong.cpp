#include "reslab/dolevstrong.hpp"

#include <algorithm>

namespace reslab::ds {

namespace {

constexpr TxId kGhostBase = 0xE200000000000000ULL;
const std::map<std::uint64_t, Value> kEmpty;

}  // namespace

std::uint64_t SigChain::layer_digest(std::size_t i) const {
  ByteWriter w;
  w.u64(id).u16(leader).u64(value_digest);
  for (std::size_t j = 0; j < i; ++j) w.u16(sigs[j].signer).u64(sigs[j].tag);
  w.u16(sigs[i].signer);
  return stable_hash(w.bytes());
}

Bytes SigChain::encode() const {
  ByteWriter w;
  w.u64(id).u16(leader).u64(value_digest).u16(static_cast<std::uint16_t>(sigs.size()));
  for (const auto& s : sigs) w.u16(s.signer).u64(s.tag);
  return w.take();
}

std::optional<SigChain> SigChain::decode(ByteReader& r) {
  try {
    SigChain c;
    c.id = r.u64();
    c.leader = r.u16();
    c.value_digest = r.u64();
    auto k = r.u16();
    if (k > r.remaining() / 10) return std::nullopt;
    for (std::uint16_t i = 0; i < k; ++i) {
      ChainSig s;
      s.signer = r.u16();
      s.tag = r.u64();
      c.sigs.push_back(s);
    }
    return c;
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

std::uint64_t value_digest(const Value& v) {
  std::uint64_t h = 0x76616c7565ULL;
  for (auto tx : v) h = hash_combine(h, tx);
  return h;
}

SigChain start_chain(std::uint64_t id, const Value& v, const crypto::SigningKey& leader_key) {
  SigChain c;
  c.id = id;
  c.leader = leader_key.signer();
  c.value_digest = value_digest(v);
  return extend_chain(c, leader_key);
}

SigChain extend_chain(const SigChain& c, const crypto::SigningKey& key) {
  SigChain out = c;
  out.sigs.push_back({key.signer(), 0});
  out.sigs.back().tag = key.sign_digest(out.layer_digest(out.sigs.size() - 1)).tag;
  return out;
}

bool validate_chain(const SigChain& chain, Round now, Role role, Round start, Round delta, std::uint32_t n,
                    const crypto::Registry& reg) {
  const auto k = chain.k();
  if (k == 0 || k > n || chain.sigs[0].signer != chain.leader || chain.leader != chain.id % n) return false;
  if (now < start) return false;
  const Round deadline = role == Role::Client ? (2 * k - 1) * delta : 2 * k * delta;
  if (now - start > deadline) return false;
  std::set<ValidatorId> seen;
  for (std::size_t i = 0; i < k; ++i) {
    const auto signer = chain.sigs[i].signer;
    if (signer >= n || !seen.insert(signer).second) return false;
    const auto digest = chain.layer_digest(i);
    if (!reg.verify_digest(PartyId::validator(signer), digest, {PartyId::validator(signer), digest, chain.sigs[i].tag})) {
      return false;
    }
  }
  return true;
}

Bytes encode_chain_message(const SigChain& chain, const Value& v) {
  ByteWriter w;
  w.u8(kChainTag).raw(chain.encode()).u32(static_cast<std::uint32_t>(v.size()));
  for (auto tx : v) w.u64(tx);
  return w.take();
}

std::optional<std::pair<SigChain, Value>> decode_chain_message(const Bytes& b) {
  if (b.empty() || static_cast<std::uint8_t>(b[0]) != kChainTag) return std::nullopt;
  try {
    ByteReader r(b);
    r.u8();
    auto chain = SigChain::decode(r);
    if (!chain) return std::nullopt;
    auto count = r.u32();
    if (count > r.remaining() / 8) return std::nullopt;
    Value v;
    for (std::uint32_t i = 0; i < count; ++i) v.push_back(r.u64());
    if (!r.done() || value_digest(v) != chain->value_digest) return std::nullopt;
    return std::make_pair(*chain, v);
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

std::optional<Value> bg_output(const std::map<std::uint64_t, Value>& v_out) {
  if (v_out.size() != 1) return std::nullopt;
  return v_out.begin()->second;
}

Validator::Validator(Params params, net::NodeContext ctx) : params_(params), ctx_(std::move(ctx)) {}

std::size_t Validator::signed_values(std::uint64_t id) const {
  auto it = signed_.find(id);
  return it == signed_.end() ? 0 : it->second.size();
}

void Validator::step(Round r, std::span<const net::Received> inbox, net::Outbox& out) {
  const auto self = static_cast<ValidatorId>(ctx_.self.index);
  for (const auto& m : inbox) {
    const auto& b = m.msg.bytes();
    if (auto tx = net::decode_tx(b)) {
      if (known_.insert(*tx).second) pending_.push_back(*tx);
      continue;
    }
    auto decoded = decode_chain_message(b);
    if (!decoded) continue;
    const auto& [chain, value] = *decoded;
    if (!validate_chain(chain, r, Role::Validator, params_.start_of(chain.id), params_.delta, params_.n,
                        *ctx_.registry)) {
      continue;
    }
    auto& mine = signed_[chain.id];
    const bool already = std::any_of(chain.sigs.begin(), chain.sigs.end(),
                                     [&](const ChainSig& s) { return s.signer == self; });
    // Relaying two distinct values is enough to force the default everywhere.
    if (already || mine.size() >= 2 || mine.count(chain.value_digest)) continue;
    mine.insert(chain.value_digest);
    out.broadcast(encode_chain_message(extend_chain(chain, ctx_.key), value));
  }

  if (r % params_.period() == 0) {
    const auto id = params_.instance(r / params_.period(), self);
    Value v(pending_.begin() + static_cast<std::ptrdiff_t>(proposed_), pending_.end());
    proposed_ = pending_.size();
    auto chain = start_chain(id, v, ctx_.key);
    signed_[id].insert(chain.value_digest);
    out.broadcast(encode_chain_message(chain, v));
  }
}

Client::Client(Params params, net::NodeContext ctx) : params_(params), ctx_(std::move(ctx)) {}

const std::map<std::uint64_t, Value>& Client::candidates(std::uint64_t id) const {
  auto it = v_out_.find(id);
  return it == v_out_.end() ? kEmpty : it->second;
}

void Client::step(Round r, std::span<const net::Received> inbox, net::Outbox& out) {
  for (const auto& m : inbox) {
    const auto& b = m.msg.bytes();
    if (m.msg.sender.kind == PartyKind::Environment) {
      if (auto tx = net::decode_tx(b)) out.broadcast(net::encode_tx(*tx));
      continue;
    }
    auto decoded = decode_chain_message(b);
    if (!decoded) continue;
    const auto& [chain, value] = *decoded;
    if (!validate_chain(chain, r, Role::Client, params_.start_of(chain.id), params_.delta, params_.n,
                        *ctx_.registry)) {
      continue;
    }
    v_out_[chain.id].emplace(chain.value_digest, value);
    if (relayed_.insert(m.msg.digest).second) out.broadcast(b);
  }

  const auto period = params_.period();
  while ((next_period_ + 1) * period <= r) {
    for (ValidatorId l = 0; l < params_.n; ++l) {
      const auto id = params_.instance(next_period_, l);
      if (auto v = bg_output(candidates(id))) {
        for (auto tx : *v) log_.append(tx);
      }
      v_out_.erase(id);
    }
    ++next_period_;
  }
}

std::unique_ptr<net::Node> DolevStrongSmr::make_validator(const net::NodeContext& ctx) const {
  return std::make_unique<Validator>(params_, ctx);
}

std::unique_ptr<net::ClientNode> DolevStrongSmr::make_client(const net::NodeContext& ctx) const {
  return std::make_unique<Client>(params_, ctx);
}

std::optional<Bytes> DolevStrongSmr::equivocate(const Bytes& payload, const crypto::SigningKey& key,
                                                std::uint64_t salt) const {
  auto decoded = decode_chain_message(payload);
  if (!decoded || decoded->first.k() != 1 || decoded->first.leader != key.signer()) return std::nullopt;
  Value v = decoded->second;
  v.push_back(kGhostBase | (salt & 0xffffff));
  return encode_chain_message(start_chain(decoded->first.id, v, key), v);
}

}  // namespace reslab::ds
