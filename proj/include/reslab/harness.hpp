#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "reslab/adversary.hpp"
#include "reslab/goldfish.hpp"
#include "reslab/netsim.hpp"
#include "reslab/trace.hpp"

namespace reslab::harness {

struct ConfigError : std::runtime_error {
  ConfigError(std::string field_name, const std::string& reason)
      : std::runtime_error(field_name + ": " + reason), field(std::move(field_name)) {}
  std::string field;
};

// Flat key=value scenario description; see README for the key list.
struct ScenarioConfig {
  std::string protocol = "int";  // int | goldfish | ds | frz | liveq | livestar | livephi
  std::string engine;            // gadget engine: int | goldfish; empty picks the kind's default
  std::uint32_t n = 4;
  std::uint32_t f = 0;
  std::uint32_t clients = 2;
  Round delta = 1;
  Round horizon = 200;
  std::uint64_t seed = 1;

  std::size_t q = 3;
  Fraction phi = Fraction::make(1, 2);
  std::uint32_t kappa = 4;
  goldfish::Rule fcr = goldfish::Rule::Threshold;
  std::optional<Round> latency;  // overrides the protocol's declared u

  ModelSelector models;
  std::string corrupt = "random";  // random | first | last

  std::string adversary = "fuzz";  // none | delay | fuzz
  double equivocate = 0.2;
  double withhold = 0.1;
  double spoof = 0.2;
  bool forge = false;

  std::string attack;  // scripted adversary; replaces `adversary`
  std::map<std::string, std::string> attack_params;

  std::uint32_t txs = 10;
  Round tx_start = 1;
  Round tx_every = 7;
  std::string tx_to = "validator";  // validator | client | all

  std::string sleep = "none";  // none | random | fixed
  double sleep_rate = 0.3;     // random: fraction of rounds an honest party spends asleep
  std::optional<Fraction> beta;  // random: upper bound; fixed: target value

  void set(const std::string& key, const std::string& value);
  void validate() const;
  // Canonical key=value lines; parse(str()) reproduces the config.
  std::string str() const;
  std::vector<std::pair<std::string, std::string>> pairs() const;

  static ScenarioConfig parse(std::string_view text);
  static ScenarioConfig load(const std::string& path);
};

std::shared_ptr<const net::Protocol> make_protocol(const ScenarioConfig& cfg);

struct RunResult {
  Trace trace;
  Verdict verdict;
  Round latency = 0;
  adv::Expectation expected;
  std::size_t forge_attempts = 0;
  std::size_t accepted_forgeries = 0;

  // Pinned expectations of a scripted attack hold (vacuous without one).
  bool meets_expectation() const;
};

RunResult run(const ScenarioConfig& cfg);

// Sleep schedule for the honest parties of one world; respects the model,
// the beta bound and the protocol's leader-awake needs.
net::SleepSchedule make_schedule(const ScenarioConfig& cfg, const net::Protocol& protocol,
                                 const std::vector<bool>& corrupted);

struct SweepRow {
  std::string protocol;
  std::string f_or_beta;
  std::string client_model;
  std::uint32_t seeds = 0;
  std::uint32_t safe_count = 0;
  std::uint32_t live_count = 0;

  bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  std::string to_csv() const;
  static SweepResult parse_csv(std::string_view csv);
  bool operator==(const SweepResult&) const = default;
};

std::string client_model_label(const ModelSelector& m);

// One run per (f, seed) with seeds base.seed + i.
SweepResult sweep(const ScenarioConfig& base, const std::vector<std::uint32_t>& f_values, std::uint32_t seeds);
// "0..6" or "1,3,5".
std::vector<std::uint32_t> parse_f_range(std::string_view s);

enum class Coordinate { ClientInteractivity, ValidatorSleepiness, ClientSleepiness };

// The same scenario with one model coordinate strengthened.
ScenarioConfig strengthen(const ScenarioConfig& weaker, Coordinate c);
// Runs both configs and compares verdicts (and trace hashes when only client
// interactivity differs). Throws ConfigError unless the configs differ in
// exactly one model coordinate.
bool hierarchy_check(const ScenarioConfig& weaker, const ScenarioConfig& stronger);

// Plain text, gzip-compressed when the path ends in ".gz".
void write_trace(const std::string& path, const Trace& trace);
Trace read_trace(const std::string& path);

}  // namespace reslab::harness
