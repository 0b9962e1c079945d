#include <algorithm>

#include "reslab/adversary.hpp"

namespace reslab::adv {

PuppetSet::PuppetSet(net::World& world, std::vector<ValidatorId> members, bool attached,
                     std::vector<std::uint32_t> shadow_clients)
    : members_(std::move(members)), attached_(attached) {
  const auto& protocol = world.protocol();
  for (auto v : members_) {
    if (!world.corrupted(v)) throw AttackError("puppet for honest validator v" + std::to_string(v));
    auto id = PartyId::validator(v);
    puppets_.push_back({id, protocol.make_validator(world.context_for(id, true)), nullptr, {}});
  }
  for (auto c : shadow_clients) {
    auto id = PartyId::client(c);
    auto client = protocol.make_client(world.context_for(id, true));
    auto* raw = client.get();
    puppets_.push_back({id, std::move(client), raw, {}});
  }
}

void PuppetSet::inject(TxId tx, Round at) {
  auto msg = net::Message::make(PartyId::environment(), net::encode_tx(tx), at);
  for (auto& p : puppets_) p.inbox.push_back({at, msg});
}

const Log* PuppetSet::shadow_output(std::uint32_t client) const {
  for (const auto& p : puppets_) {
    if (p.client && p.id == PartyId::client(client)) return &p.client->output();
  }
  return nullptr;
}

std::vector<std::pair<PartyId, Bytes>> PuppetSet::step(Round r, std::span<const net::Message> observed) {
  if (attached_) {
    for (const auto& m : observed) {
      const bool env = m.sender.kind == PartyKind::Environment;
      for (auto& p : puppets_) {
        // Environment inputs reach only validator puppets, right away.
        if (env && p.client) continue;
        p.inbox.push_back({env ? r : r + 1, m});
      }
    }
  }

  std::vector<std::pair<PartyId, Bytes>> sent;
  net::Outbox out;
  for (auto& p : puppets_) {
    auto keep = std::stable_partition(p.inbox.begin(), p.inbox.end(), [r](const Pending& x) { return x.at > r; });
    std::vector<net::Received> inbox;
    for (auto it = keep; it != p.inbox.end(); ++it) inbox.push_back({std::move(it->msg), r});
    p.inbox.erase(keep, p.inbox.end());
    std::stable_sort(inbox.begin(), inbox.end(), net::delivery_order);
    out.clear();
    p.node->step(r, inbox, out);
    for (const auto& item : out.items()) sent.emplace_back(p.id, item);
  }
  for (const auto& [from, payload] : sent) {
    auto msg = net::Message::make(from, payload, r);
    for (auto& p : puppets_) {
      if (p.id != from) p.inbox.push_back({r + 1, msg});
    }
  }
  return sent;
}


}  // namespace reslab::adv
