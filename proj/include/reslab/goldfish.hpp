#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "reslab/netsim.hpp"

namespace reslab::goldfish {

// Slot t spans rounds [3*delta*t, 3*delta*(t+1)): propose at the start, vote
// after delta, merge the buffer after 2*delta. Every validator votes every slot.

enum class MsgTag : std::uint8_t { Block = 0x20, Vote = 0x21, Proposal = 0x22 };

inline constexpr std::uint64_t kGenesis = 0;

struct Block {
  std::uint64_t parent = kGenesis;
  std::uint64_t slot = 0;
  ValidatorId proposer = 0;
  std::vector<TxId> txs;
  std::uint64_t tag = 0;

  // Identity of the block; also the digest the proposer signs.
  std::uint64_t id() const;
};

struct Vote {
  std::uint64_t slot = 0;
  std::uint64_t block = kGenesis;
  ValidatorId voter = 0;
  std::uint64_t tag = 0;

  std::uint64_t digest() const;
};

void encode_block(ByteWriter& w, const Block& b);
Block decode_block(ByteReader& r);
void encode_vote(ByteWriter& w, const Vote& v);
Vote decode_vote(ByteReader& r);

// Blocks plus at most one counted vote per (slot, voter); the first one seen
// wins. The same type serves as a party's buffer.
class BvTree {
 public:
  bool add_block(const Block& b);
  bool add_vote(const Vote& v);
  void merge(const BvTree& other);
  void expire_votes_before(std::uint64_t slot);

  bool has_block(std::uint64_t id) const { return id == kGenesis || blocks_.count(id) != 0; }
  const Block* block(std::uint64_t id) const;
  const std::map<std::uint64_t, Block>& blocks() const { return blocks_; }
  const std::map<ValidatorId, Vote>& votes(std::uint64_t slot) const;
  const std::map<std::uint64_t, std::map<ValidatorId, Vote>>& all_votes() const { return votes_; }

  // True when the ancestry of id reaches genesis through known blocks with
  // strictly increasing slots.
  bool reachable(std::uint64_t id) const;
  bool descends(std::uint64_t id, std::uint64_t ancestor) const;
  // Genesis excluded, oldest first.
  std::vector<const Block*> chain(std::uint64_t tip) const;

 private:
  std::map<std::uint64_t, Block> blocks_;
  std::map<std::uint64_t, std::map<ValidatorId, Vote>> votes_;
};

enum class Rule : std::uint8_t { MaxChild, Threshold };

struct ForkChoice {
  std::uint64_t tip = kGenesis;
  // Deepest block on the path whose subtree carries at least one vote.
  std::uint64_t weighted_tip = kGenesis;
  std::size_t total = 0;  // unique voters for the slot, T
  std::vector<std::pair<std::uint64_t, std::size_t>> path;  // (block, subtree weight) per descent step
};

// Reads only the votes of vote_slot. Ties go to the lowest block id.
ForkChoice fork_choice(const BvTree& tree, std::uint64_t vote_slot, Rule rule, Fraction phi);

struct Params {
  std::uint32_t n = 4;
  Round delta = 1;
  Rule rule = Rule::Threshold;
  Fraction phi = Fraction::make(1, 2);
  std::uint32_t kappa = 4;

  Round slot_length() const { return 3 * delta; }
  Round latency() const { return (kappa + 2) * 3 * delta; }
};

ValidatorId leader(const crypto::RandomOracle& oracle, std::uint64_t slot, std::uint32_t n);

// Shared by validators and clients: buffer, bvtree and the joining rule.
class PartyCore {
 public:
  PartyCore(Params params, net::NodeContext ctx);

  // Returns payloads to echo (validators only echo).
  void ingest(Round r, std::span<const net::Received> inbox, std::vector<Bytes>* echo);
  void merge_buffer();
  // Awake continuously since before the previous slot's merge round.
  bool joined(std::uint64_t slot) const;
  void note_awake(Round r);

  const BvTree& tree() const { return tree_; }
  BvTree& tree() { return tree_; }
  const BvTree& buffer() const { return buffer_; }
  BvTree& buffer() { return buffer_; }
  std::optional<Block> proposal_for(std::uint64_t slot) const;
  // Adds the bvtree carried by the slot's proposal to the bvtree, bypassing the buffer.
  void merge_proposal(std::uint64_t slot);
  const Params& params() const { return params_; }
  const net::NodeContext& ctx() const { return ctx_; }

 protected:
  bool block_valid(const Block& b) const;
  bool vote_valid(const Vote& v) const;

  Params params_;
  net::NodeContext ctx_;
  BvTree tree_;
  BvTree buffer_;
  std::map<std::uint64_t, std::pair<Block, BvTree>> proposals_;  // first valid proposal per slot
  std::set<std::uint64_t> seen_;
  Round awake_since_ = 0;
  std::optional<Round> last_round_;
};

class Validator : public net::Node {
 public:
  Validator(Params params, net::NodeContext ctx);
  void step(Round r, std::span<const net::Received> inbox, net::Outbox& out) override;
  const PartyCore& core() const { return core_; }

 private:
  PartyCore core_;
  std::vector<TxId> pending_;
  std::set<TxId> known_;
};

class Client : public net::EngineClient {
 public:
  Client(Params params, net::NodeContext ctx);
  void step(Round r, std::span<const net::Received> inbox) override;
  const Log& log() const override { return log_; }
  const PartyCore& core() const { return core_; }

 private:
  PartyCore core_;
  Log log_;
};

Bytes encode_proposal(const Block& b, const BvTree& tree, std::uint64_t vote_slot);

class GoldfishProtocol : public net::Engine {
 public:
  explicit GoldfishProtocol(Params params) : params_(params) {}

  std::string name() const override { return "goldfish"; }
  std::unique_ptr<net::Node> make_validator(const net::NodeContext& ctx) const override;
  std::unique_ptr<net::EngineClient> make_engine_client(const net::NodeContext& ctx) const override;
  Round latency() const override { return params_.latency(); }
  std::optional<Bytes> equivocate(const Bytes& payload, const crypto::SigningKey& key,
                                  std::uint64_t salt) const override;
  const Params& params() const { return params_; }

 private:
  Params params_;
};

}  // namespace reslab::goldfish
