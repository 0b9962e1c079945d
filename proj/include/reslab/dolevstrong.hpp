#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "reslab/netsim.hpp"

namespace reslab::ds {

inline constexpr std::uint8_t kChainTag = 0x40;

struct ChainSig {
  ValidatorId signer = 0;
  std::uint64_t tag = 0;
};

// Nested signatures flattened: signature i covers the serialization of every
// earlier layer plus its own signer index.
struct SigChain {
  std::uint64_t id = 0;
  ValidatorId leader = 0;
  std::uint64_t value_digest = 0;
  std::vector<ChainSig> sigs;

  std::size_t k() const { return sigs.size(); }
  std::uint64_t layer_digest(std::size_t i) const;
  // id:u64 | leader:u16 | value-digest:u64 | k:u16 | (signer:u16, tag:u64)*
  Bytes encode() const;
  static std::optional<SigChain> decode(ByteReader& r);
};

using Value = std::vector<TxId>;
std::uint64_t value_digest(const Value& v);

SigChain start_chain(std::uint64_t id, const Value& v, const crypto::SigningKey& leader_key);
SigChain extend_chain(const SigChain& c, const crypto::SigningKey& key);

enum class Role : std::uint8_t { Validator, Client };

// Structure, signatures and the depth-dependent deadline: (2k-1)*delta after
// R for clients, 2k*delta for validators.
bool validate_chain(const SigChain& chain, Round now, Role role, Round start, Round delta, std::uint32_t n,
                    const crypto::Registry& reg);

Bytes encode_chain_message(const SigChain& chain, const Value& v);
std::optional<std::pair<SigChain, Value>> decode_chain_message(const Bytes& b);

// The unique candidate, or nothing when there are zero or several.
std::optional<Value> bg_output(const std::map<std::uint64_t, Value>& v_out);

struct Params {
  std::uint32_t n = 4;
  Round delta = 1;

  Round period() const { return 2 * n * delta; }
  Round latency() const { return 4 * n * delta; }
  std::uint64_t instance(std::uint64_t period_index, ValidatorId leader) const { return period_index * n + leader; }
  Round start_of(std::uint64_t id) const { return (id / n) * period(); }
  ValidatorId leader_of(std::uint64_t id) const { return static_cast<ValidatorId>(id % n); }
};

class Validator : public net::Node {
 public:
  Validator(Params params, net::NodeContext ctx);
  void step(Round r, std::span<const net::Received> inbox, net::Outbox& out) override;
  // Distinct values this validator signed in the instance.
  std::size_t signed_values(std::uint64_t id) const;

 private:
  Params params_;
  net::NodeContext ctx_;
  std::vector<TxId> pending_;
  std::set<TxId> known_;
  std::size_t proposed_ = 0;  // prefix of pending_ already proposed
  std::map<std::uint64_t, std::set<std::uint64_t>> signed_;  // instance -> value digests
};

class Client : public net::ClientNode {
 public:
  Client(Params params, net::NodeContext ctx);
  void step(Round r, std::span<const net::Received> inbox, net::Outbox& out) override;
  const Log& output() const override { return log_; }
  const std::map<std::uint64_t, Value>& candidates(std::uint64_t id) const;

 private:
  Params params_;
  net::NodeContext ctx_;
  std::map<std::uint64_t, std::map<std::uint64_t, Value>> v_out_;  // instance -> digest -> value
  std::set<std::uint64_t> relayed_;
  std::uint64_t next_period_ = 0;  // first period not yet appended
  Log log_;
};

class DolevStrongSmr : public net::Protocol {
 public:
  explicit DolevStrongSmr(Params params) : params_(params) {}

  std::string name() const override { return "ds"; }
  std::unique_ptr<net::Node> make_validator(const net::NodeContext& ctx) const override;
  std::unique_ptr<net::ClientNode> make_client(const net::NodeContext& ctx) const override;
  Round latency() const override { return params_.latency(); }
  std::optional<Bytes> equivocate(const Bytes& payload, const crypto::SigningKey& key,
                                  std::uint64_t salt) const override;
  const Params& params() const { return params_; }

 private:
  Params params_;
};

}  // namespace reslab::ds
