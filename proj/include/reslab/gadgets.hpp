#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "reslab/internal_protocol.hpp"
#include "reslab/netsim.hpp"

namespace reslab::gadgets {

enum class Kind : std::uint8_t { Freeze, LiveQ, LiveStar, LivePhi };

std::string to_string(Kind k);
std::optional<Kind> parse_kind(std::string_view s);

enum class MsgTag : std::uint8_t { TxSig = 0x30, Heartbeat = 0x31, Transcript = 0x32 };

std::uint64_t tx_sig_digest(TxId tx);
std::uint64_t heartbeat_digest(std::uint64_t ell);

Bytes encode_tx_sig(TxId tx, ValidatorId signer, std::uint64_t tag);
Bytes encode_heartbeat(std::uint64_t ell, ValidatorId signer, std::uint64_t tag);
Bytes encode_transcript(const sync::Certificate& cert);

struct SignedItem {
  std::uint64_t value = 0;  // tx id or heartbeat number
  ValidatorId signer = 0;
  std::uint64_t tag = 0;
};
std::optional<SignedItem> decode_tx_sig(const Bytes& b);
std::optional<SignedItem> decode_heartbeat(const Bytes& b);

// Transactions with the round they were queued; no id appears twice.
class LivenessQueue {
 public:
  bool add(TxId tx, Round round);
  bool contains(TxId tx) const { return ids_.count(tx) != 0; }
  std::size_t size() const { return entries_.size(); }
  // Entries ordered by (round added, tx id).
  const std::set<std::pair<Round, TxId>>& entries() const { return entries_; }

 private:
  std::set<std::pair<Round, TxId>> entries_;
  std::set<TxId> ids_;
};

// internal ++ queue entries added at or before r - u_int, skipping txs already present.
Log append_queue(const Log& internal, const LivenessQueue& queue, Round r, Round u_int);

// Signer sets behind the heartbeat-weighted threshold.
class HeartbeatTally {
 public:
  void tx_signature(TxId tx, ValidatorId signer);
  void heartbeat(std::uint64_t ell, ValidatorId signer);

  std::size_t tx_signers(TxId tx) const;
  // Validators that sent heartbeat ell or signed tx.
  std::size_t awake_estimate(std::uint64_t ell, TxId tx) const;
  // Transactions whose signer count reaches phi of their awake estimate.
  std::vector<TxId> qualifying(std::uint64_t ell, Fraction phi) const;

 private:
  std::map<TxId, std::set<ValidatorId>> tx_;
  std::map<std::uint64_t, std::set<ValidatorId>> heartbeats_;
};

struct Params {
  Kind kind = Kind::Freeze;
  std::uint32_t n = 4;
  Round delta = 1;
  std::size_t q = 3;  // signature threshold of the silent-client queue
  Fraction phi = Fraction::make(1, 2);
  Round u_int = 0;  // latency of the wrapped engine
};

Round latency(const Params& p);

class GadgetValidator : public net::Node {
 public:
  GadgetValidator(Params params, net::NodeContext ctx, std::unique_ptr<net::Node> inner);
  void step(Round r, std::span<const net::Received> inbox, net::Outbox& out) override;

 private:
  Params params_;
  net::NodeContext ctx_;
  std::unique_ptr<net::Node> inner_;
  std::set<TxId> seen_;
  std::vector<TxId> unsigned_;  // heartbeat variant: waiting for the next multiple of delta
};

class FreezeClient : public net::ClientNode {
 public:
  FreezeClient(Params params, net::NodeContext ctx, sync::Params engine);
  void step(Round r, std::span<const net::Received> inbox, net::Outbox& out) override;
  const Log& output() const override { return output_; }

  const sync::ClientCore& internal() const { return core_; }
  // Distinct logs decoded from accepted transcripts, own ones included.
  const std::vector<Log>& observed() const { return m_; }

 private:
  void observe(const Log& log, Round r);
  bool consistent_with_observed(const Log& l) const;

  Params params_;
  sync::Params engine_;
  net::NodeContext ctx_;
  sync::ClientCore core_;
  std::vector<Log> m_;
  std::set<std::uint64_t> m_digests_;
  bool m_is_chain_ = true;
  Log m_top_;
  std::map<std::uint64_t, std::pair<Log, Round>> candidates_;  // digest -> (log, first seen)
  std::set<std::uint64_t> relayed_;
  Log last_internal_;
  Log output_;
};

// Shared client for the three queue gadgets.
class QueueClient : public net::ClientNode {
 public:
  QueueClient(Params params, net::NodeContext ctx, std::unique_ptr<net::EngineClient> inner);
  void step(Round r, std::span<const net::Received> inbox, net::Outbox& out) override;
  const Log& output() const override { return output_; }

  const LivenessQueue& queue() const { return queue_; }
  const HeartbeatTally& tally() const { return tally_; }
  const Log& internal_log() const { return inner_->log(); }
  // Length of the queue suffix in the current output.
  std::size_t appended() const { return output_.size() - inner_->log().size(); }

 private:
  Params params_;
  net::NodeContext ctx_;
  std::unique_ptr<net::EngineClient> inner_;
  LivenessQueue queue_;
  HeartbeatTally tally_;
  std::map<TxId, std::set<ValidatorId>> signers_;
  std::set<TxId> gossiped_;
  std::optional<std::uint64_t> last_tick_;
  Log output_;
};

class GadgetProtocol : public net::Protocol {
 public:
  GadgetProtocol(Params params, std::shared_ptr<const net::Engine> engine);

  std::string name() const override { return to_string(params_.kind); }
  std::unique_ptr<net::Node> make_validator(const net::NodeContext& ctx) const override;
  std::unique_ptr<net::ClientNode> make_client(const net::NodeContext& ctx) const override;
  Round latency() const override { return gadgets::latency(params_); }
  std::optional<Bytes> equivocate(const Bytes& payload, const crypto::SigningKey& key,
                                  std::uint64_t salt) const override {
    return engine_->equivocate(payload, key, salt);
  }
  const Params& params() const { return params_; }
  const net::Engine& engine() const { return *engine_; }

 private:
  Params params_;
  std::shared_ptr<const net::Engine> engine_;
};

}  // namespace reslab::gadgets
