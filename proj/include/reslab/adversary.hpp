#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "reslab/netsim.hpp"

namespace reslab::adv {

// Attack requested under a model or corruption set it cannot run in.
struct AttackError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Honest code running on adversary keys, fed by the adversary's own network:
// other puppets after one round and, when attached, every honest message one
// round after it was sent. A detached set is a nested execution over the
// corrupted subset that never hears from the honest world.
class PuppetSet {
 public:
  PuppetSet(net::World& world, std::vector<ValidatorId> members, bool attached,
            std::vector<std::uint32_t> shadow_clients = {});

  void inject(TxId tx, Round at);
  // Steps every puppet at round r; returns what they broadcast, tagged with the claimed sender.
  std::vector<std::pair<PartyId, Bytes>> step(Round r, std::span<const net::Message> observed);

  const std::vector<ValidatorId>& members() const { return members_; }
  // Output of a shadow client, if one runs under that label.
  const Log* shadow_output(std::uint32_t client) const;

 private:
  struct Pending {
    Round at;
    net::Message msg;
  };
  struct Puppet {
    PartyId id;
    std::unique_ptr<net::Node> node;
    net::ClientNode* client = nullptr;
    std::vector<Pending> inbox;
  };

  std::vector<ValidatorId> members_;
  std::vector<Puppet> puppets_;
  bool attached_;
};

struct FuzzOptions {
  double equivocate = 0.2;  // per puppet message
  double withhold = 0.1;    // per (puppet message, recipient)
  double spoof = 0.2;       // per round
  // Quorum of the certifiable engine to audit with forged certificates; 0 disables.
  std::size_t forge_q = 0;
};

// Randomized baseline: puppets for the corrupted validators, random honest
// delays, equivocation, withholding and client spoofing.
class Fuzz : public net::Adversary {
 public:
  Fuzz(std::uint64_t seed, FuzzOptions options) : rng_(seed), options_(options) {}

  void on_start(net::World& world) override;
  Round honest_delay(const net::Message& m, PartyId to, Round delta) override;
  void on_round(net::AdversaryApi& api) override;

  // Forged certificates the consumer accepted for a log no honest client had.
  std::size_t accepted_forgeries() const { return accepted_forgeries_; }
  std::size_t forge_attempts() const { return forge_attempts_; }

 private:
  void forge(net::AdversaryApi& api);
  std::vector<PartyId> honest_parties(const net::AdversaryApi& api) const;

  std::mt19937_64 rng_;
  FuzzOptions options_;
  net::World* world_ = nullptr;
  std::unique_ptr<PuppetSet> puppets_;
  std::vector<net::Message> history_;
  std::size_t accepted_forgeries_ = 0;
  std::size_t forge_attempts_ = 0;
};

struct Expectation {
  std::optional<bool> safe;
  std::optional<bool> live;
};

struct AttackSetup {
  const net::Protocol* protocol = nullptr;
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  ModelSelector models;
  std::uint64_t seed = 1;
  std::map<std::string, std::string> params;
};

// A scripted adversary that also shapes the world it runs in.
class AttackScript : public net::Adversary {
 public:
  explicit AttackScript(AttackSetup setup) : setup_(std::move(setup)) {}
  virtual std::string name() const = 0;
  // Corruption set, clients, injections and sleep schedule.
  virtual void configure(net::WorldSpec& spec) const = 0;
  virtual Expectation expected() const = 0;

 protected:
  std::string param(const std::string& key, const std::string& fallback) const;
  AttackSetup setup_;
};

struct AttackInfo {
  std::string name;
  std::string summary;
};

const std::vector<AttackInfo>& attack_registry();
std::unique_ptr<AttackScript> make_attack(const std::string& name, const AttackSetup& setup);

// Quorum of the certifiable internal protocol inside a protocol, if any.
std::optional<std::size_t> certifiable_quorum(const net::Protocol& p);

// Exact (f, awake) pair with f/awake closest to beta among n validators,
// preferring larger f and leaving at least one honest validator asleep when possible.
std::pair<std::uint32_t, std::uint32_t> beta_split(std::uint32_t n, Fraction beta);

}  // namespace reslab::adv
