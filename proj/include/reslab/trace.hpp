#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "reslab/core.hpp"

namespace reslab {

// Inject is a point-to-point send by the adversary under a claimed identity.
enum class EventKind : std::uint8_t { Send, Deliver, Input, Wake, Sleep, Output, Inject };

std::string to_string(EventKind k);

struct Event {
  Round round = 0;
  EventKind kind = EventKind::Send;
  PartyId from;
  PartyId to;
  std::uint64_t digest = 0;
};

// A transaction as received by a party through its inbox (the party was awake).
struct TxReceipt {
  TxId tx = 0;
  Round round = 0;
  PartyId recipient;
};

struct TraceMeta {
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  std::uint32_t clients = 0;
  Round delta = 1;
  Round horizon = 0;
  std::uint64_t seed = 0;
  ModelSelector models;
  std::vector<bool> corrupted;  // per validator
  std::string protocol;
  Round declared_latency = 0;
  std::vector<std::pair<std::string, std::string>> config;
};

class Trace {
 public:
  Trace() = default;
  explicit Trace(TraceMeta meta);

  const TraceMeta& meta() const { return meta_; }
  TraceMeta& meta() { return meta_; }

  void add_event(const Event& e);
  void add_receipt(const TxReceipt& r) { receipts_.push_back(r); }
  // Records client k's log at round r; consecutive equal logs are collapsed.
  void record_log(std::uint32_t client, Round r, const Log& log);
  void set_client_awake(std::uint32_t client, Round r, bool awake);
  void set_validator_awake(std::uint32_t v, Round r, bool awake);

  const std::vector<Event>& events() const { return events_; }
  const std::vector<TxReceipt>& receipts() const { return receipts_; }
  const std::vector<std::pair<Round, Log>>& log_changes(std::uint32_t client) const { return logs_.at(client); }

  // LOG_k^r. Rounds before the first record see genesis.
  const Log& log_at(std::uint32_t client, Round r) const;
  bool client_awake(std::uint32_t client, Round r) const;
  bool validator_awake(std::uint32_t v, Round r) const;
  bool honest_validator(std::uint32_t v) const { return v >= meta_.corrupted.size() || !meta_.corrupted[v]; }

  // Adversary fraction f / min_r |W_r|, with |W_r| counting every awake validator.
  double beta() const;
  std::size_t min_awake_validators() const;

  std::uint64_t hash() const { return hash_; }
  // Number of honest sends by clients; adversary injections under a client claim do not count.
  std::size_t client_sends() const { return client_sends_; }

  void write(std::ostream& os) const;
  static Trace read(std::istream& is);

 private:
  void ensure_round(Round r);

  TraceMeta meta_;
  std::vector<Event> events_;
  std::vector<TxReceipt> receipts_;
  std::vector<std::vector<std::pair<Round, Log>>> logs_;
  std::vector<std::vector<std::uint8_t>> client_awake_;     // [client][round]
  std::vector<std::vector<std::uint8_t>> validator_awake_;  // [validator][round]
  std::uint64_t hash_ = 0x7472616365ULL;
  std::size_t client_sends_ = 0;
};

// Safe iff every pair of honest client logs across all rounds is consistent,
// including a client against itself at two rounds.
SafetyVerdict check_safety(const Trace& trace);

// Live iff every tx received before r-u by an awake honest validator, or by an
// awake honest client when clients are communicating, is in LOG_p^r for every
// honest client p awake throughout [r-u, r].
LivenessVerdict check_liveness(const Trace& trace, Round u);

Verdict check(const Trace& trace, Round u);

// Re-checks a safety witness against the trace it came from.
bool witness_replays(const Trace& trace, const SafetyWitness& w);

}  // namespace reslab
