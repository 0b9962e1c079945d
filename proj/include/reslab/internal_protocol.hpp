#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "reslab/netsim.hpp"

namespace reslab::sync {

// Lockstep epochs of 4 delta rounds with leader e mod n. Validators vote once
// per epoch, assemble quorum certificates, and sign the logs they commit;
// q commit signatures on one (epoch, log) form the client-facing Certificate.

enum class MsgTag : std::uint8_t {
  Proposal = 0x10,
  Vote = 0x11,
  QuorumCert = 0x12,
  Evidence = 0x13,
  CommitSig = 0x14,
  Certificate = 0x15,
};

struct SigEntry {
  ValidatorId signer = 0;
  std::uint64_t tag = 0;
  bool operator==(const SigEntry&) const = default;
};

// q or more signatures over (epoch, log digest) in one signing domain. The
// commit-domain form is the certificate clients consume.
struct Certificate {
  std::uint64_t epoch = 0;
  Log log;
  std::vector<SigEntry> sigs;

  bool genesis() const { return sigs.empty() && log.empty(); }
  // (epoch + 1, length) for non-genesis certificates, (0, 0) for genesis.
  std::pair<std::uint64_t, std::size_t> rank() const;

  // epoch:u64 | log-digest:u64 | log-body | sig-count:u16 | (signer:u16, tag:u64)*
  // where log-body is count:u32 followed by that many u64 ids.
  Bytes encode() const;
  static std::optional<Certificate> decode(std::string_view bytes);
};

enum class Domain : std::uint8_t { Proposal = 1, Vote = 2, Commit = 3 };

std::uint64_t signing_digest(Domain d, std::uint64_t epoch, const Log& log);

struct ConsumeResult {
  enum class Reason : std::uint8_t { Accepted, TooFewSigners, BadSignature, DuplicateSigner, Malformed };

  std::optional<Log> log;
  Reason reason = Reason::Accepted;

  bool accepted() const { return log.has_value(); }
};

std::string to_string(ConsumeResult::Reason r);

// Pure check of a certificate in the given signing domain.
ConsumeResult verify_certificate(const Certificate& cert, const crypto::Registry& reg, std::size_t q,
                                 Domain domain);
ConsumeResult consume(const Certificate& cert, const crypto::Registry& reg, std::size_t q);
ConsumeResult consume(std::string_view wire, const crypto::Registry& reg, std::size_t q);

struct Proposal {
  std::uint64_t epoch = 0;
  ValidatorId leader = 0;
  Log log;
  Certificate justify;  // vote-domain certificate the log extends
  std::uint64_t tag = 0;

  Bytes encode() const;
  static std::optional<Proposal> decode(ByteReader& r);
  std::uint64_t digest() const { return signing_digest(Domain::Proposal, epoch, log); }
};

struct Vote {
  ValidatorId voter = 0;
  Proposal proposal;
  std::uint64_t tag = 0;
};

struct EquivocationEvidence {
  Proposal first;
  Proposal second;
};

Bytes encode_message(const Proposal& p);
Bytes encode_message(const Vote& v);
Bytes encode_quorum_cert(const Certificate& qc);
Bytes encode_message(const EquivocationEvidence& e);
Bytes encode_commit_sig(std::uint64_t epoch, const Log& log, SigEntry sig);
Bytes encode_certificate_message(const Certificate& cert);

Proposal make_proposal(std::uint64_t epoch, const Log& log, const Certificate& justify, const crypto::SigningKey& key);
bool proposal_valid(const Proposal& p, const crypto::Registry& reg, std::uint32_t n, std::size_t q);

// Certificate assembled from the given keys; accepted by consume only when
// there are at least q of them.
Certificate forge_certificate(std::uint64_t epoch, const Log& log, const std::vector<crypto::SigningKey>& keys);

struct Params {
  std::uint32_t n = 4;
  std::size_t q = 3;
  Round delta = 1;

  Round epoch_length() const { return 4 * delta; }
  ValidatorId leader(std::uint64_t epoch) const { return static_cast<ValidatorId>(epoch % n); }
  // Worst case: up to n-q consecutive faulty leaders, the honest epoch that
  // proposes, its commit reaching clients, and a client-to-validator hop.
  Round latency() const { return 4 * delta * (n - q + 2) + 2 * delta; }
};

class ValidatorState : public net::Node {
 public:
  ValidatorState(Params params, net::NodeContext ctx);

  void step(Round r, std::span<const net::Received> inbox, net::Outbox& out) override;

  const Certificate& highest_certificate() const { return best_qc_; }
  const Log& committed() const { return committed_; }
  std::size_t votes_cast() const { return votes_cast_; }
  // Feeds a transaction as if first seen from the environment.
  void add_tx(TxId tx, net::Outbox& out);

 private:
  struct EpochView {
    std::vector<Proposal> proposals;  // distinct, in arrival order
    std::map<std::uint64_t, std::map<ValidatorId, std::uint64_t>> votes;  // proposal digest -> signer -> tag
    std::map<std::uint64_t, Proposal> voted_proposals;
    std::optional<Certificate> qc_at_2delta;
    std::vector<Certificate> qcs;
    bool evidence = false;
    bool evidence_sent = false;
    bool voted = false;
  };

  void handle(const net::Received& m, net::Outbox& out);
  void note_proposal(const Proposal& p, net::Outbox& out);
  void adopt_qc(const Certificate& qc, net::Outbox& out);
  EpochView& view(std::uint64_t epoch) { return epochs_[epoch]; }

  Params params_;
  net::NodeContext ctx_;
  ValidatorId self_;
  std::vector<TxId> known_;
  std::set<TxId> known_set_;
  Certificate best_qc_;
  Certificate lock_;
  Log committed_;
  std::map<std::uint64_t, EpochView> epochs_;
  std::set<std::uint64_t> seen_qc_;
  std::size_t votes_cast_ = 0;
};

// Client half: tracks the highest-ranked accepted commit certificate.
class ClientCore : public net::EngineClient {
 public:
  ClientCore(Params params, net::NodeContext ctx);

  void step(Round r, std::span<const net::Received> inbox) override;
  const Log& log() const override { return current_.log; }

  // Current transcript; consume(witness()) equals log().
  const Certificate& witness() const { return current_; }
  // Accepts a certificate from any source; returns whether it was new and valid.
  bool offer(const Certificate& cert);
  // Certificates accepted since the last call, in acceptance order.
  std::vector<Certificate> take_accepted();

 private:
  Params params_;
  net::NodeContext ctx_;
  Certificate current_;
  std::map<std::pair<std::uint64_t, std::uint64_t>, Certificate> partial_;  // (epoch, log digest)
  std::set<std::uint64_t> seen_;
  std::vector<Certificate> accepted_;
};

class InternalProtocol : public net::Engine {
 public:
  explicit InternalProtocol(Params params) : params_(params) {}

  std::string name() const override { return "int"; }
  std::unique_ptr<net::Node> make_validator(const net::NodeContext& ctx) const override;
  std::unique_ptr<net::EngineClient> make_engine_client(const net::NodeContext& ctx) const override;
  Round latency() const override { return params_.latency(); }
  std::optional<Bytes> equivocate(const Bytes& payload, const crypto::SigningKey& key,
                                  std::uint64_t salt) const override;
  const Params& params() const { return params_; }

 private:
  Params params_;
};

}  // namespace reslab::sync
