#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace reslab {

using Round = std::uint64_t;
using TxId = std::uint64_t;
using ValidatorId = std::uint16_t;

struct Transaction {
  TxId id = 0;
  std::string payload;
};

enum class PartyKind : std::uint8_t { Validator = 0, Client = 1, Environment = 2 };

struct PartyId {
  PartyKind kind = PartyKind::Validator;
  std::uint32_t index = 0;

  static PartyId validator(std::uint32_t i) { return {PartyKind::Validator, i}; }
  static PartyId client(std::uint32_t i) { return {PartyKind::Client, i}; }
  static PartyId environment() { return {PartyKind::Environment, 0}; }
  // Recipient placeholder for a broadcast in trace events.
  static PartyId everyone() { return {PartyKind::Environment, 1}; }

  bool is_validator() const { return kind == PartyKind::Validator; }
  bool is_client() const { return kind == PartyKind::Client; }

  // "v3", "c0", "env", "*".
  std::string str() const;
  static std::optional<PartyId> parse(std::string_view s);

  auto operator<=>(const PartyId&) const = default;
};

enum class Honesty : std::uint8_t { Honest, Adversary };

enum class ValidatorModel : std::uint8_t { AlwaysOn, Sleepy };
enum class ClientSleepiness : std::uint8_t { AlwaysOn, Sleepy };
enum class ClientInteractivity : std::uint8_t { Silent, Communicating };

struct ModelSelector {
  ValidatorModel validator_model = ValidatorModel::AlwaysOn;
  ClientSleepiness client_sleepiness = ClientSleepiness::AlwaysOn;
  ClientInteractivity client_interactivity = ClientInteractivity::Silent;

  bool communicating() const { return client_interactivity == ClientInteractivity::Communicating; }
  bool operator==(const ModelSelector&) const = default;
};

std::string to_string(ValidatorModel m);
std::string to_string(ClientSleepiness m);
std::string to_string(ClientInteractivity m);

// Exact rational in lowest terms, used for thresholds such as 5/8.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Fraction make(std::int64_t num, std::int64_t den);
  static Fraction parse(std::string_view s);  // "5/8" or a bare integer
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const;

  // a/b >= this, evaluated without rounding.
  bool reached_by(std::int64_t a, std::int64_t b) const { return a * den >= num * b; }
  bool operator==(const Fraction&) const = default;
};

struct ResiliencePair {
  double t_live = 0.0;
  double t_safe = 0.0;

  ResiliencePair(double live, double safe);
};

// Ordered transaction ids. Appending an id already present is a no-op.
class Log {
 public:
  Log() = default;
  explicit Log(const std::vector<TxId>& txs);

  bool append(TxId id);
  void append(const Log& other);

  const std::vector<TxId>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(TxId id) const { return index_.count(id) != 0; }
  TxId operator[](std::size_t i) const { return entries_[i]; }

  std::uint64_t digest() const;
  // "[1,2,3]"
  std::string str() const;
  static Log parse(std::string_view s);

  bool operator==(const Log& o) const { return entries_ == o.entries_; }

 private:
  std::vector<TxId> entries_;
  std::unordered_set<TxId> index_;
};

bool is_prefix(const Log& a, const Log& b);
bool is_consistent(const Log& a, const Log& b);

struct SafetyWitness {
  PartyId first;
  Round first_round = 0;
  Log first_log;
  PartyId second;
  Round second_round = 0;
  Log second_log;
};

struct SafetyVerdict {
  bool safe = true;
  std::optional<SafetyWitness> witness;
};

struct LivenessWitness {
  TxId tx = 0;
  Round receipt = 0;
  PartyId starving;
  Round round = 0;
};

struct LivenessVerdict {
  bool live = true;
  std::optional<LivenessWitness> witness;
};

struct Verdict {
  SafetyVerdict safety;
  LivenessVerdict liveness;

  bool safe() const { return safety.safe; }
  bool live() const { return liveness.live; }
  // safety=<SAFE|VIOLATION> liveness=<LIVE|VIOLATION> [evidence=...]
  std::string str() const;
};

}  // namespace reslab
