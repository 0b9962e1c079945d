#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "reslab/bytes.hpp"
#include "reslab/core.hpp"
#include "reslab/cryptosim.hpp"
#include "reslab/trace.hpp"

namespace reslab::net {

struct SilentClientSend : std::logic_error {
  using std::logic_error::logic_error;
};
struct HorizonExceeded : std::logic_error {
  using std::logic_error::logic_error;
};
// An adversary action outside the model (delay out of bounds, impersonating an
// honest validator, putting a corrupted validator to sleep).
struct IllegalAction : std::logic_error {
  using std::logic_error::logic_error;
};

struct Message {
  PartyId sender;
  std::shared_ptr<const Bytes> payload;
  std::uint64_t digest = 0;
  Round sent_at = 0;

  const Bytes& bytes() const { return *payload; }
  static Message make(PartyId sender, Bytes payload, Round sent_at);
};

struct Received {
  Message msg;
  Round receipt = 0;
};

// Transaction inputs and transaction gossip share one encoding across protocols.
inline constexpr std::uint8_t kTxTag = 0x01;
Bytes encode_tx(TxId id);
std::optional<TxId> decode_tx(const Bytes& payload);

class Outbox {
 public:
  void broadcast(Bytes payload) { items_.push_back(std::move(payload)); }
  const std::vector<Bytes>& items() const { return items_; }
  bool empty() const { return items_.empty(); }
  void clear() { items_.clear(); }

 private:
  std::vector<Bytes> items_;
};

struct NodeContext {
  PartyId self;
  std::uint32_t n = 0;
  std::uint32_t clients = 0;
  Round delta = 1;
  const crypto::Registry* registry = nullptr;
  crypto::SigningKey key;  // empty for clients
  const crypto::RandomOracle* oracle = nullptr;
};

class Node {
 public:
  virtual ~Node() = default;
  // Called once per round while the party is awake.
  virtual void step(Round r, std::span<const Received> inbox, Outbox& out) = 0;
};

class ClientNode : public Node {
 public:
  virtual const Log& output() const = 0;
};

class Protocol {
 public:
  virtual ~Protocol() = default;
  virtual std::string name() const = 0;
  virtual std::unique_ptr<Node> make_validator(const NodeContext& ctx) const = 0;
  virtual std::unique_ptr<ClientNode> make_client(const NodeContext& ctx) const = 0;
  // Declared liveness latency u in rounds.
  virtual Round latency() const = 0;
  // Adversary hook: a conflicting variant of a payload a corrupted validator is
  // about to send, signed with that validator's key, if the protocol has one.
  virtual std::optional<Bytes> equivocate(const Bytes& payload, const crypto::SigningKey& key,
                                          std::uint64_t salt) const {
    (void)payload;
    (void)key;
    (void)salt;
    return std::nullopt;
  }
};

// Client half of an SMR engine, embeddable inside a gadget client.
class EngineClient {
 public:
  virtual ~EngineClient() = default;
  virtual void step(Round r, std::span<const Received> inbox) = 0;
  virtual const Log& log() const = 0;
};

// A protocol whose client half can be wrapped by a gadget.
class Engine : public Protocol {
 public:
  virtual std::unique_ptr<EngineClient> make_engine_client(const NodeContext& ctx) const = 0;
  std::unique_ptr<ClientNode> make_client(const NodeContext& ctx) const override;
};

// Per-round awake sets. Missing rows mean everyone is awake.
struct SleepSchedule {
  std::vector<std::vector<std::uint8_t>> validators;  // [round][validator]
  std::vector<std::vector<std::uint8_t>> clients;     // [round][client]

  bool validator_awake(Round r, std::uint32_t v) const;
  bool client_awake(Round r, std::uint32_t c) const;
  void set_validator(Round r, std::uint32_t v, bool awake, std::uint32_t n);
  void set_client(Round r, std::uint32_t c, bool awake, std::uint32_t clients);
};

struct TxInjection {
  Round round = 0;
  TxId tx = 0;
  std::vector<PartyId> recipients;
};

struct WorldSpec {
  std::uint32_t n = 4;
  std::uint32_t clients = 2;
  Round delta = 1;
  Round horizon = 100;
  std::uint64_t seed = 1;
  ModelSelector models;
  std::vector<bool> corrupted;
  std::vector<TxInjection> injections;
  SleepSchedule schedule;
};

class World;

// What the adversary may do during one round, after every honest party has
// stepped (rushing).
class AdversaryApi {
 public:
  AdversaryApi(World& world, std::span<const Message> observed) : world_(world), observed_(observed) {}

  Round round() const;
  Round delta() const;
  std::uint32_t n() const;
  std::uint32_t clients() const;
  bool corrupted(ValidatorId v) const;
  // Every honest message sent this round plus environment inputs addressed to
  // corrupted validators.
  std::span<const Message> observed() const { return observed_; }

  // Point-to-point send; claim must be a corrupted validator or any client.
  void send(PartyId claim, Bytes payload, PartyId to, Round deliver_at);
  void send_to_honest(PartyId claim, const Bytes& payload, Round deliver_at);
  crypto::SigningKey key(ValidatorId v) const;

 private:
  World& world_;
  std::span<const Message> observed_;
};

class Adversary {
 public:
  virtual ~Adversary() = default;
  // Runs before round 0; may rewrite the sleep schedule of honest parties.
  virtual void on_start(World& world) { (void)world; }
  // Delivery gap for an honest message to an honest recipient, in [1, delta].
  virtual Round honest_delay(const Message& m, PartyId to, Round delta) {
    (void)m;
    (void)to;
    return delta;
  }
  virtual void on_round(AdversaryApi& api) { (void)api; }
};

class World {
 public:
  World(WorldSpec spec, const Protocol& protocol, Adversary* adversary);

  const WorldSpec& spec() const { return spec_; }
  SleepSchedule& schedule() { return spec_.schedule; }
  const Protocol& protocol() const { return protocol_; }
  Round round() const { return round_; }
  bool corrupted(ValidatorId v) const { return v < spec_.corrupted.size() && spec_.corrupted[v]; }
  bool awake(PartyId p) const;

  // Context for a node, signing as the party itself or as the adversary.
  NodeContext context_for(PartyId p, bool adversary_owned);
  crypto::Registry& registry() { return registry_; }
  const crypto::RandomOracle& oracle() const { return oracle_; }

  // Honest send at the current round. Recipients are every other honest party.
  void broadcast(PartyId sender, Bytes payload, Round r);
  // Messages with delivery round <= r not yet consumed, stamped with receipt r.
  std::vector<Received> deliver_inbox(PartyId party, Round r);
  // Moves to the next round: sleep sets, then environment inputs.
  Round advance_round();
  // Executes the current round: awake honest parties step, then the adversary.
  void execute_round();

  Trace run();
  Trace& trace() { return trace_; }

  // Used by AdversaryApi after legality checks.
  void enqueue(PartyId claim, std::shared_ptr<const Bytes> payload, std::uint64_t digest, PartyId to, Round at);

 private:
  struct Pending {
    Round at;
    Message msg;
  };

  std::vector<Pending>& inbox_of(PartyId p);
  void begin_round();

  WorldSpec spec_;
  const Protocol& protocol_;
  Adversary* adversary_;
  crypto::Registry registry_;
  crypto::RandomOracle oracle_;
  std::vector<std::unique_ptr<Node>> validators_;
  std::vector<std::unique_ptr<ClientNode>> clients_;
  std::vector<std::vector<Pending>> validator_inbox_;
  std::vector<std::vector<Pending>> client_inbox_;
  std::vector<bool> validator_awake_;
  std::vector<bool> client_awake_;
  std::vector<Message> observed_;
  Trace trace_;
  Round round_ = 0;
  bool started_ = false;
};

// Sorting key for same-round deliveries.
bool delivery_order(const Received& a, const Received& b);

}  // namespace reslab::net
