#include "reslab/goldfish.hpp"

#include <algorithm>
#include <limits>

namespace reslab::goldfish {

namespace {

constexpr std::uint64_t kNoSlot = std::numeric_limits<std::uint64_t>::max();
constexpr TxId kGhostBase = 0xE100000000000000ULL;

const std::map<ValidatorId, Vote> kNoVotes;

struct DecodedProposal {
  Block block;
  std::vector<Block> blocks;
  std::vector<Vote> votes;
};

DecodedProposal decode_proposal_body(ByteReader& r) {
  DecodedProposal p;
  p.block = decode_block(r);
  auto nb = r.u32();
  for (std::uint32_t i = 0; i < nb; ++i) p.blocks.push_back(decode_block(r));
  auto nv = r.u32();
  for (std::uint32_t i = 0; i < nv; ++i) p.votes.push_back(decode_vote(r));
  return p;
}

Bytes encode_proposal_parts(const Block& b, const std::vector<const Block*>& blocks, const std::vector<Vote>& votes) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(MsgTag::Proposal));
  encode_block(w, b);
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  for (const auto* x : blocks) encode_block(w, *x);
  w.u32(static_cast<std::uint32_t>(votes.size()));
  for (const auto& v : votes) encode_vote(w, v);
  return w.take();
}

}  // namespace

std::uint64_t Block::id() const {
  auto h = hash_combine(0x626c6f636bULL, parent);
  h = hash_combine(h, slot);
  h = hash_combine(h, proposer);
  for (auto tx : txs) h = hash_combine(h, tx);
  return h == kGenesis ? 1 : h;
}

std::uint64_t Vote::digest() const { return hash_combine(hash_combine(0x766f7465ULL, slot), block); }

void encode_block(ByteWriter& w, const Block& b) {
  w.u64(b.parent).u64(b.slot).u16(b.proposer).u32(static_cast<std::uint32_t>(b.txs.size()));
  for (auto tx : b.txs) w.u64(tx);
  w.u64(b.tag);
}

Block decode_block(ByteReader& r) {
  Block b;
  b.parent = r.u64();
  b.slot = r.u64();
  b.proposer = r.u16();
  auto count = r.u32();
  if (count > r.remaining() / 8) throw DecodeError("tx count exceeds input");
  for (std::uint32_t i = 0; i < count; ++i) b.txs.push_back(r.u64());
  b.tag = r.u64();
  return b;
}

void encode_vote(ByteWriter& w, const Vote& v) { w.u64(v.slot).u64(v.block).u16(v.voter).u64(v.tag); }

Vote decode_vote(ByteReader& r) {
  Vote v;
  v.slot = r.u64();
  v.block = r.u64();
  v.voter = r.u16();
  v.tag = r.u64();
  return v;
}

bool BvTree::add_block(const Block& b) { return blocks_.emplace(b.id(), b).second; }

bool BvTree::add_vote(const Vote& v) { return votes_[v.slot].emplace(v.voter, v).second; }

void BvTree::merge(const BvTree& other) {
  for (const auto& [id, b] : other.blocks_) blocks_.emplace(id, b);
  for (const auto& [slot, vs] : other.votes_) {
    auto& mine = votes_[slot];
    for (const auto& [voter, v] : vs) mine.emplace(voter, v);
  }
}

void BvTree::expire_votes_before(std::uint64_t slot) { votes_.erase(votes_.begin(), votes_.lower_bound(slot)); }

const Block* BvTree::block(std::uint64_t id) const {
  auto it = blocks_.find(id);
  return it == blocks_.end() ? nullptr : &it->second;
}

const std::map<ValidatorId, Vote>& BvTree::votes(std::uint64_t slot) const {
  auto it = votes_.find(slot);
  return it == votes_.end() ? kNoVotes : it->second;
}

bool BvTree::reachable(std::uint64_t id) const {
  while (id != kGenesis) {
    const Block* b = block(id);
    if (!b) return false;
    if (b->parent != kGenesis) {
      const Block* p = block(b->parent);
      if (!p || p->slot >= b->slot) return false;
    }
    id = b->parent;
  }
  return true;
}

bool BvTree::descends(std::uint64_t id, std::uint64_t ancestor) const {
  while (true) {
    if (id == ancestor) return true;
    if (id == kGenesis) return false;
    const Block* b = block(id);
    if (!b) return false;
    id = b->parent;
  }
}

std::vector<const Block*> BvTree::chain(std::uint64_t tip) const {
  std::vector<const Block*> out;
  while (tip != kGenesis) {
    const Block* b = block(tip);
    if (!b) break;
    out.push_back(b);
    tip = b->parent;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

ForkChoice fork_choice(const BvTree& tree, std::uint64_t vote_slot, Rule rule, Fraction phi) {
  ForkChoice fc;
  std::map<std::uint64_t, std::vector<std::uint64_t>> children;
  std::set<std::uint64_t> live;
  for (const auto& [id, b] : tree.blocks()) {
    if (!tree.reachable(id)) continue;
    live.insert(id);
    children[b.parent].push_back(id);
  }
  std::map<std::uint64_t, std::size_t> weight;
  for (const auto& [voter, v] : tree.votes(vote_slot)) {
    (void)voter;
    const auto block = v.block;
    if (block != kGenesis && !live.count(block)) continue;
    ++fc.total;
    for (auto id = block;; id = tree.block(id)->parent) {
      ++weight[id];
      if (id == kGenesis) break;
    }
  }

  std::uint64_t cur = kGenesis;
  while (true) {
    auto it = children.find(cur);
    if (it == children.end()) break;
    std::optional<std::uint64_t> best;
    std::size_t best_w = 0;
    for (auto child : it->second) {  // ascending id
      std::size_t w = weight.count(child) ? weight.at(child) : 0;
      if (rule == Rule::Threshold && (w == 0 || !phi.reached_by(static_cast<std::int64_t>(w),
                                                                 static_cast<std::int64_t>(fc.total)))) {
        continue;
      }
      if (!best || w > best_w) {
        best = child;
        best_w = w;
      }
    }
    if (!best) break;
    cur = *best;
    fc.path.emplace_back(cur, best_w);
    if (best_w > 0) fc.weighted_tip = cur;
  }
  fc.tip = cur;
  return fc;
}

ValidatorId leader(const crypto::RandomOracle& oracle, std::uint64_t slot, std::uint32_t n) {
  return static_cast<ValidatorId>(oracle(hash_combine(0x676f6c64ULL, slot)) % n);
}

Bytes encode_proposal(const Block& b, const BvTree& tree, std::uint64_t vote_slot) {
  std::vector<const Block*> blocks;
  for (const auto& [id, x] : tree.blocks()) {
    (void)id;
    blocks.push_back(&x);
  }
  std::vector<Vote> votes;
  for (const auto& [voter, v] : tree.votes(vote_slot)) {
    (void)voter;
    votes.push_back(v);
  }
  return encode_proposal_parts(b, blocks, votes);
}

PartyCore::PartyCore(Params params, net::NodeContext ctx) : params_(params), ctx_(std::move(ctx)) {}

bool PartyCore::block_valid(const Block& b) const {
  if (b.proposer >= params_.n || b.proposer != leader(*ctx_.oracle, b.slot, params_.n)) return false;
  crypto::Signature sig{PartyId::validator(b.proposer), b.id(), b.tag};
  return ctx_.registry->verify_digest(sig.signer, b.id(), sig);
}

bool PartyCore::vote_valid(const Vote& v) const {
  if (v.voter >= params_.n) return false;
  crypto::Signature sig{PartyId::validator(v.voter), v.digest(), v.tag};
  return ctx_.registry->verify_digest(sig.signer, v.digest(), sig);
}

void PartyCore::note_awake(Round r) {
  if (!last_round_ ? r != 0 : *last_round_ + 1 != r) awake_since_ = r;
  last_round_ = r;
}

bool PartyCore::joined(std::uint64_t slot) const {
  if (awake_since_ == 0) return true;
  if (slot == 0) return false;
  return awake_since_ <= params_.slot_length() * (slot - 1) + 2 * params_.delta;
}

std::optional<Block> PartyCore::proposal_for(std::uint64_t slot) const {
  auto it = proposals_.find(slot);
  if (it == proposals_.end()) return std::nullopt;
  return it->second.first;
}

void PartyCore::ingest(Round, std::span<const net::Received> inbox, std::vector<Bytes>* echo) {
  for (const auto& m : inbox) {
    const auto& bytes = m.msg.bytes();
    if (bytes.empty() || !seen_.insert(m.msg.digest).second) continue;
    try {
      ByteReader r(bytes);
      auto tag = static_cast<MsgTag>(r.u8());
      bool relay = false;
      if (tag == MsgTag::Block) {
        auto b = decode_block(r);
        if (block_valid(b)) {
          buffer_.add_block(b);
          relay = true;
        }
      } else if (tag == MsgTag::Vote) {
        auto v = decode_vote(r);
        if (vote_valid(v)) {
          buffer_.add_vote(v);
          relay = true;
        }
      } else if (tag == MsgTag::Proposal) {
        auto p = decode_proposal_body(r);
        if (!block_valid(p.block)) continue;
        BvTree carried;
        carried.add_block(p.block);
        for (const auto& b : p.blocks) {
          if (block_valid(b)) carried.add_block(b);
        }
        for (const auto& v : p.votes) {
          if (vote_valid(v)) carried.add_vote(v);
        }
        buffer_.merge(carried);
        proposals_.emplace(p.block.slot, std::make_pair(p.block, carried));
        relay = true;
      }
      if (relay && echo) echo->push_back(bytes);
    } catch (const DecodeError&) {
    }
  }
}

void PartyCore::merge_proposal(std::uint64_t slot) {
  auto it = proposals_.find(slot);
  if (it != proposals_.end()) tree_.merge(it->second.second);
}

void PartyCore::merge_buffer() {
  tree_.merge(buffer_);
  buffer_ = BvTree{};
}

Validator::Validator(Params params, net::NodeContext ctx) : core_(params, std::move(ctx)) {}

void Validator::step(Round r, std::span<const net::Received> inbox, net::Outbox& out) {
  core_.note_awake(r);
  std::vector<Bytes> echo;
  core_.ingest(r, inbox, &echo);
  for (auto& e : echo) out.broadcast(std::move(e));
  for (const auto& m : inbox) {
    if (auto tx = net::decode_tx(m.msg.bytes()); tx && known_.insert(*tx).second) {
      pending_.push_back(*tx);
      out.broadcast(net::encode_tx(*tx));
    }
  }

  const auto& p = core_.params();
  const auto& ctx = core_.ctx();
  const std::uint64_t t = r / p.slot_length();
  const Round off = r % p.slot_length();
  const std::uint64_t prev = t == 0 ? kNoSlot : t - 1;
  const auto self = static_cast<ValidatorId>(ctx.self.index);

  if (off == 0) {
    if (leader(*ctx.oracle, t, p.n) != self || !core_.joined(t)) return;
    BvTree combined = core_.tree();
    combined.merge(core_.buffer());
    auto fc = fork_choice(combined, prev, p.rule, p.phi);
    std::set<TxId> included;
    for (const auto* b : combined.chain(fc.tip)) included.insert(b->txs.begin(), b->txs.end());
    Block block;
    block.parent = fc.tip;
    block.slot = t;
    block.proposer = self;
    for (auto tx : pending_) {
      if (!included.count(tx)) block.txs.push_back(tx);
    }
    block.tag = ctx.key.sign_digest(block.id()).tag;

    auto bytes = encode_proposal(block, combined, prev);
    std::vector<net::Received> own{{net::Message::make(ctx.self, bytes, r), r}};
    core_.ingest(r, own, nullptr);
    out.broadcast(std::move(bytes));
  } else if (off == p.delta) {
    if (!core_.joined(t)) return;
    auto prop = core_.proposal_for(t);
    core_.merge_proposal(t);
    auto fc = fork_choice(core_.tree(), prev, p.rule, p.phi);
    Vote v{t, fc.tip, self, 0};
    if (prop && core_.tree().reachable(prop->id()) && core_.tree().descends(prop->id(), fc.weighted_tip)) {
      v.block = prop->id();
    }
    v.tag = ctx.key.sign_digest(v.digest()).tag;
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(MsgTag::Vote));
    encode_vote(w, v);
    core_.buffer().add_vote(v);
    out.broadcast(w.take());
  } else if (off == 2 * p.delta) {
    core_.merge_buffer();
    core_.tree().expire_votes_before(t);
  }
}

Client::Client(Params params, net::NodeContext ctx) : core_(params, std::move(ctx)) {}

void Client::step(Round r, std::span<const net::Received> inbox) {
  core_.note_awake(r);
  core_.ingest(r, inbox, nullptr);
  const auto& p = core_.params();
  const std::uint64_t t = r / p.slot_length();
  if (r % p.slot_length() != 2 * p.delta) return;
  core_.merge_buffer();
  if (core_.joined(t)) {
    auto fc = fork_choice(core_.tree(), t, p.rule, p.phi);
    Log log;
    for (const auto* b : core_.tree().chain(fc.tip)) {
      if (b->slot + p.kappa > t) break;
      for (auto tx : b->txs) log.append(tx);
    }
    log_ = std::move(log);
  }
  core_.tree().expire_votes_before(t);
}

std::unique_ptr<net::Node> GoldfishProtocol::make_validator(const net::NodeContext& ctx) const {
  return std::make_unique<Validator>(params_, ctx);
}

std::unique_ptr<net::EngineClient> GoldfishProtocol::make_engine_client(const net::NodeContext& ctx) const {
  return std::make_unique<Client>(params_, ctx);
}

std::optional<Bytes> GoldfishProtocol::equivocate(const Bytes& payload, const crypto::SigningKey& key,
                                                  std::uint64_t salt) const {
  if (payload.empty() || static_cast<MsgTag>(static_cast<std::uint8_t>(payload[0])) != MsgTag::Proposal) {
    return std::nullopt;
  }
  try {
    ByteReader r(payload);
    r.u8();
    auto p = decode_proposal_body(r);
    if (p.block.proposer != key.signer()) return std::nullopt;
    Block alt = p.block;
    alt.txs.push_back(kGhostBase | (salt & 0xffffff));
    alt.tag = key.sign_digest(alt.id()).tag;
    std::vector<const Block*> blocks;
    for (const auto& b : p.blocks) blocks.push_back(&b);
    return encode_proposal_parts(alt, blocks, p.votes);
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

}  // namespace reslab::goldfish
