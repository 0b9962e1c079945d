#include "reslab/internal_protocol.hpp"

#include <algorithm>

namespace reslab::sync {

namespace {

void write_log(ByteWriter& w, const Log& log) {
  w.u32(static_cast<std::uint32_t>(log.size()));
  for (auto id : log.entries()) w.u64(id);
}

Log read_log(ByteReader& r) {
  auto count = r.u32();
  if (count > r.remaining() / 8) throw DecodeError("log length exceeds input");
  Log log;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!log.append(r.u64())) throw DecodeError("duplicate entry in log body");
  }
  return log;
}

void write_cert(ByteWriter& w, const Certificate& c) {
  w.u64(c.epoch).u64(c.log.digest());
  write_log(w, c.log);
  w.u16(static_cast<std::uint16_t>(c.sigs.size()));
  for (const auto& s : c.sigs) w.u16(s.signer).u64(s.tag);
}

Certificate read_cert(ByteReader& r) {
  Certificate c;
  c.epoch = r.u64();
  auto digest = r.u64();
  c.log = read_log(r);
  if (digest != c.log.digest()) throw DecodeError("log digest mismatch");
  auto count = r.u16();
  for (std::uint16_t i = 0; i < count; ++i) {
    SigEntry s;
    s.signer = r.u16();
    s.tag = r.u64();
    c.sigs.push_back(s);
  }
  return c;
}

MsgTag tag_of(const Bytes& b) { return b.empty() ? MsgTag{0} : static_cast<MsgTag>(static_cast<std::uint8_t>(b[0])); }

crypto::Signature as_signature(ValidatorId signer, std::uint64_t digest, std::uint64_t tag) {
  return {PartyId::validator(signer), digest, tag};
}

bool sig_ok(const crypto::Registry& reg, ValidatorId signer, std::uint64_t digest, std::uint64_t tag) {
  return reg.verify_digest(PartyId::validator(signer), digest, as_signature(signer, digest, tag));
}

std::uint64_t cert_key(const Certificate& c) { return hash_combine(c.epoch, c.log.digest()); }

constexpr TxId kGhostBase = 0xE000000000000000ULL;

}  // namespace

std::pair<std::uint64_t, std::size_t> Certificate::rank() const {
  if (genesis()) return {0, 0};
  return {epoch + 1, log.size()};
}

Bytes Certificate::encode() const {
  ByteWriter w;
  write_cert(w, *this);
  return w.take();
}

std::optional<Certificate> Certificate::decode(std::string_view bytes) {
  try {
    ByteReader r(bytes);
    auto c = read_cert(r);
    if (!r.done()) return std::nullopt;
    return c;
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

std::uint64_t signing_digest(Domain d, std::uint64_t epoch, const Log& log) {
  return hash_combine(hash_combine(0x53594e43ULL + static_cast<std::uint64_t>(d), epoch), log.digest());
}

std::string to_string(ConsumeResult::Reason r) {
  switch (r) {
    case ConsumeResult::Reason::Accepted: return "accepted";
    case ConsumeResult::Reason::TooFewSigners: return "too-few-signers";
    case ConsumeResult::Reason::BadSignature: return "bad-signature";
    case ConsumeResult::Reason::DuplicateSigner: return "duplicate-signer";
    case ConsumeResult::Reason::Malformed: return "malformed";
  }
  return "?";
}

ConsumeResult verify_certificate(const Certificate& cert, const crypto::Registry& reg, std::size_t q, Domain domain) {
  ConsumeResult out;
  if (cert.genesis()) {
    out.log = Log{};
    return out;
  }
  auto digest = signing_digest(domain, cert.epoch, cert.log);
  std::set<ValidatorId> signers;
  for (const auto& s : cert.sigs) {
    if (!sig_ok(reg, s.signer, digest, s.tag)) {
      out.reason = ConsumeResult::Reason::BadSignature;
      return out;
    }
    if (!signers.insert(s.signer).second) {
      out.reason = ConsumeResult::Reason::DuplicateSigner;
      return out;
    }
  }
  if (signers.size() < q) {
    out.reason = ConsumeResult::Reason::TooFewSigners;
    return out;
  }
  out.log = cert.log;
  return out;
}

ConsumeResult consume(const Certificate& cert, const crypto::Registry& reg, std::size_t q) {
  return verify_certificate(cert, reg, q, Domain::Commit);
}

ConsumeResult consume(std::string_view wire, const crypto::Registry& reg, std::size_t q) {
  auto cert = Certificate::decode(wire);
  if (!cert) {
    ConsumeResult out;
    out.reason = ConsumeResult::Reason::Malformed;
    return out;
  }
  return consume(*cert, reg, q);
}

Bytes Proposal::encode() const {
  ByteWriter w;
  w.u64(epoch).u16(leader);
  write_log(w, log);
  write_cert(w, justify);
  w.u64(tag);
  return w.take();
}

std::optional<Proposal> Proposal::decode(ByteReader& r) {
  try {
    Proposal p;
    p.epoch = r.u64();
    p.leader = r.u16();
    p.log = read_log(r);
    p.justify = read_cert(r);
    p.tag = r.u64();
    return p;
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

Bytes encode_message(const Proposal& p) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(MsgTag::Proposal)).raw(p.encode());
  return w.take();
}

Bytes encode_message(const Vote& v) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(MsgTag::Vote)).u16(v.voter).raw(v.proposal.encode()).u64(v.tag);
  return w.take();
}

Bytes encode_quorum_cert(const Certificate& qc) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(MsgTag::QuorumCert)).raw(qc.encode());
  return w.take();
}

Bytes encode_message(const EquivocationEvidence& e) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(MsgTag::Evidence)).raw(e.first.encode()).raw(e.second.encode());
  return w.take();
}

Bytes encode_commit_sig(std::uint64_t epoch, const Log& log, SigEntry sig) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(MsgTag::CommitSig)).u64(epoch);
  write_log(w, log);
  w.u16(sig.signer).u64(sig.tag);
  return w.take();
}

Bytes encode_certificate_message(const Certificate& cert) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(MsgTag::Certificate)).raw(cert.encode());
  return w.take();
}

Proposal make_proposal(std::uint64_t epoch, const Log& log, const Certificate& justify, const crypto::SigningKey& key) {
  Proposal p;
  p.epoch = epoch;
  p.leader = key.signer();
  p.log = log;
  p.justify = justify;
  p.tag = key.sign_digest(p.digest()).tag;
  return p;
}

bool proposal_valid(const Proposal& p, const crypto::Registry& reg, std::uint32_t n, std::size_t q) {
  if (n == 0 || p.leader != p.epoch % n) return false;
  if (!sig_ok(reg, p.leader, p.digest(), p.tag)) return false;
  if (!verify_certificate(p.justify, reg, q, Domain::Vote).accepted()) return false;
  return is_prefix(p.justify.log, p.log);
}

Certificate forge_certificate(std::uint64_t epoch, const Log& log, const std::vector<crypto::SigningKey>& keys) {
  Certificate c;
  c.epoch = epoch;
  c.log = log;
  auto digest = signing_digest(Domain::Commit, epoch, log);
  for (const auto& k : keys) c.sigs.push_back({k.signer(), k.sign_digest(digest).tag});
  return c;
}

ValidatorState::ValidatorState(Params params, net::NodeContext ctx)
    : params_(params), ctx_(std::move(ctx)), self_(static_cast<ValidatorId>(ctx_.self.index)) {}

void ValidatorState::add_tx(TxId tx, net::Outbox& out) {
  if (!known_set_.insert(tx).second) return;
  known_.push_back(tx);
  out.broadcast(net::encode_tx(tx));
}

void ValidatorState::note_proposal(const Proposal& p, net::Outbox& out) {
  auto& ev = view(p.epoch);
  for (const auto& seen : ev.proposals) {
    if (seen.digest() == p.digest()) return;
  }
  for (const auto& seen : ev.proposals) {
    if (!is_consistent(seen.log, p.log)) {
      ev.evidence = true;
      if (!ev.evidence_sent) {
        ev.evidence_sent = true;
        out.broadcast(encode_message(EquivocationEvidence{seen, p}));
      }
      break;
    }
  }
  ev.proposals.push_back(p);
}

void ValidatorState::adopt_qc(const Certificate& qc, net::Outbox& out) {
  if (!seen_qc_.insert(cert_key(qc)).second) return;
  view(qc.epoch).qcs.push_back(qc);
  out.broadcast(encode_quorum_cert(qc));
  if (qc.rank() > best_qc_.rank()) best_qc_ = qc;
}

void ValidatorState::handle(const net::Received& m, net::Outbox& out) {
  const auto& b = m.msg.bytes();
  if (auto tx = net::decode_tx(b)) {
    add_tx(*tx, out);
    return;
  }
  ByteReader r(b);
  try {
    switch (static_cast<MsgTag>(r.u8())) {
      case MsgTag::Proposal: {
        auto p = Proposal::decode(r);
        if (p && proposal_valid(*p, *ctx_.registry, params_.n, params_.q)) note_proposal(*p, out);
        break;
      }
      case MsgTag::Vote: {
        Vote v;
        v.voter = r.u16();
        auto p = Proposal::decode(r);
        if (!p) break;
        v.proposal = *p;
        v.tag = r.u64();
        if (v.voter >= params_.n || !proposal_valid(v.proposal, *ctx_.registry, params_.n, params_.q)) break;
        if (!sig_ok(*ctx_.registry, v.voter, signing_digest(Domain::Vote, p->epoch, p->log), v.tag)) break;
        note_proposal(v.proposal, out);
        auto& ev = view(p->epoch);
        ev.votes[p->digest()].emplace(v.voter, v.tag);
        ev.voted_proposals.emplace(p->digest(), v.proposal);
        break;
      }
      case MsgTag::QuorumCert: {
        auto qc = read_cert(r);
        if (!qc.genesis() && verify_certificate(qc, *ctx_.registry, params_.q, Domain::Vote).accepted()) adopt_qc(qc, out);
        break;
      }
      case MsgTag::Evidence: {
        auto a = Proposal::decode(r);
        auto c = Proposal::decode(r);
        if (!a || !c || a->epoch != c->epoch) break;
        if (!proposal_valid(*a, *ctx_.registry, params_.n, params_.q)) break;
        if (!proposal_valid(*c, *ctx_.registry, params_.n, params_.q)) break;
        if (is_consistent(a->log, c->log)) break;
        note_proposal(*a, out);
        note_proposal(*c, out);
        break;
      }
      default:
        break;
    }
  } catch (const DecodeError&) {
  }
}

void ValidatorState::step(Round r, std::span<const net::Received> inbox, net::Outbox& out) {
  for (const auto& m : inbox) handle(m, out);

  const Round len = params_.epoch_length();
  const std::uint64_t e = r / len;
  const Round off = r % len;
  const Round d = params_.delta;
  auto& ev = view(e);

  if (off == 0 && params_.leader(e) == self_) {
    Log log = best_qc_.log;
    for (auto tx : known_) log.append(tx);
    auto p = make_proposal(e, log, best_qc_, ctx_.key);
    note_proposal(p, out);
    out.broadcast(encode_message(p));
  } else if (off == d && !ev.voted) {
    if (!ev.evidence) {
      for (const auto& p : ev.proposals) {
        if (p.justify.rank() < lock_.rank()) continue;
        ev.voted = true;
        ++votes_cast_;
        Vote v{self_, p, ctx_.key.sign_digest(signing_digest(Domain::Vote, e, p.log)).tag};
        ev.votes[p.digest()].emplace(self_, v.tag);
        ev.voted_proposals.emplace(p.digest(), p);
        out.broadcast(encode_message(v));
        break;
      }
    }
  } else if (off == 2 * d) {
    if (!ev.evidence) {
      for (const auto& [digest, signers] : ev.votes) {
        if (signers.size() < params_.q) continue;
        const auto& p = ev.voted_proposals.at(digest);
        Certificate qc;
        qc.epoch = e;
        qc.log = p.log;
        for (const auto& [signer, tag] : signers) qc.sigs.push_back({signer, tag});
        adopt_qc(qc, out);
        break;
      }
      for (const auto& qc : ev.qcs) {
        if (!ev.qc_at_2delta || qc.rank() > ev.qc_at_2delta->rank()) ev.qc_at_2delta = qc;
      }
    }
  } else if (off == 3 * d) {
    if (ev.qc_at_2delta && !ev.evidence) {
      const auto& qc = *ev.qc_at_2delta;
      bool conflict = std::any_of(ev.qcs.begin(), ev.qcs.end(),
                                  [&](const Certificate& c) { return !is_consistent(c.log, qc.log); });
      if (!conflict) {
        committed_ = qc.log;
        auto tag = ctx_.key.sign_digest(signing_digest(Domain::Commit, e, qc.log)).tag;
        out.broadcast(encode_commit_sig(e, qc.log, {self_, tag}));
      }
    }
    lock_ = best_qc_;
  }
}

ClientCore::ClientCore(Params params, net::NodeContext ctx) : params_(params), ctx_(std::move(ctx)) {}

bool ClientCore::offer(const Certificate& cert) {
  if (!seen_.insert(stable_hash(cert.encode())).second) return false;
  if (!consume(cert, *ctx_.registry, params_.q).accepted()) return false;
  accepted_.push_back(cert);
  if (cert.rank() > current_.rank()) current_ = cert;
  return true;
}

std::vector<Certificate> ClientCore::take_accepted() {
  std::vector<Certificate> out;
  out.swap(accepted_);
  return out;
}

void ClientCore::step(Round, std::span<const net::Received> inbox) {
  for (const auto& m : inbox) {
    const auto& b = m.msg.bytes();
    if (b.empty()) continue;
    try {
      ByteReader r(b);
      auto tag = static_cast<MsgTag>(r.u8());
      if (tag == MsgTag::CommitSig) {
        auto epoch = r.u64();
        auto log = read_log(r);
        SigEntry s;
        s.signer = r.u16();
        s.tag = r.u64();
        if (s.signer >= params_.n) continue;
        if (!sig_ok(*ctx_.registry, s.signer, signing_digest(Domain::Commit, epoch, log), s.tag)) continue;
        auto& partial = partial_[{epoch, log.digest()}];
        partial.epoch = epoch;
        partial.log = log;
        bool dup = std::any_of(partial.sigs.begin(), partial.sigs.end(),
                               [&](const SigEntry& x) { return x.signer == s.signer; });
        if (dup) continue;
        partial.sigs.push_back(s);
        if (partial.sigs.size() == params_.q) {
          auto cert = partial;
          std::sort(cert.sigs.begin(), cert.sigs.end(),
                    [](const SigEntry& a, const SigEntry& c) { return a.signer < c.signer; });
          offer(cert);
        }
      } else if (tag == MsgTag::Certificate) {
        offer(read_cert(r));
      }
    } catch (const DecodeError&) {
    }
  }
}

std::unique_ptr<net::Node> InternalProtocol::make_validator(const net::NodeContext& ctx) const {
  return std::make_unique<ValidatorState>(params_, ctx);
}

std::unique_ptr<net::EngineClient> InternalProtocol::make_engine_client(const net::NodeContext& ctx) const {
  return std::make_unique<ClientCore>(params_, ctx);
}

std::optional<Bytes> InternalProtocol::equivocate(const Bytes& payload, const crypto::SigningKey& key,
                                                  std::uint64_t salt) const {
  if (tag_of(payload) != MsgTag::Proposal) return std::nullopt;
  ByteReader r(payload);
  r.u8();
  auto p = Proposal::decode(r);
  if (!p || p->leader != key.signer()) return std::nullopt;
  Log alt = p->justify.log;
  alt.append(kGhostBase | (salt & 0xffffff));
  return encode_message(make_proposal(p->epoch, alt, p->justify, key));
}

}  // namespace reslab::sync
