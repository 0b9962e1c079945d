#include "reslab/trace.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "reslab/bytes.hpp"

namespace reslab {

namespace {

const char* kKindNames[] = {"send", "deliver", "input", "wake", "sleep", "output", "inject"};

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    auto pos = s.find(sep);
    out.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) break;
    s = s.substr(pos + 1);
  }
  return out;
}

std::uint64_t to_u64(std::string_view s, int base = 10) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("bad number in trace: " + std::string(s));
  return v;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

EventKind kind_from(std::string_view s) {
  for (int i = 0; i < 7; ++i) {
    if (s == kKindNames[i]) return static_cast<EventKind>(i);
  }
  throw std::invalid_argument("bad event kind: " + std::string(s));
}

}  // namespace

std::string to_string(EventKind k) { return kKindNames[static_cast<int>(k)]; }

Trace::Trace(TraceMeta meta) : meta_(std::move(meta)) {
  logs_.resize(meta_.clients);
  client_awake_.assign(meta_.clients, std::vector<std::uint8_t>(meta_.horizon + 1, 1));
  validator_awake_.assign(meta_.n, std::vector<std::uint8_t>(meta_.horizon + 1, 1));
  if (meta_.corrupted.size() < meta_.n) meta_.corrupted.resize(meta_.n, false);
}

void Trace::add_event(const Event& e) {
  events_.push_back(e);
  std::uint64_t h = hash_combine(e.round, static_cast<std::uint64_t>(e.kind));
  h = hash_combine(h, (static_cast<std::uint64_t>(e.from.kind) << 32) | e.from.index);
  h = hash_combine(h, (static_cast<std::uint64_t>(e.to.kind) << 32) | e.to.index);
  h = hash_combine(h, e.digest);
  hash_ = hash_combine(hash_, h);
  if (e.kind == EventKind::Send && e.from.is_client()) ++client_sends_;
}

void Trace::record_log(std::uint32_t client, Round r, const Log& log) {
  auto& changes = logs_.at(client);
  if (!changes.empty() && changes.back().second == log) return;
  changes.emplace_back(r, log);
  add_event({r, EventKind::Output, PartyId::client(client), PartyId::client(client), log.digest()});
}

void Trace::set_client_awake(std::uint32_t client, Round r, bool awake) {
  if (r < client_awake_.at(client).size()) client_awake_[client][r] = awake ? 1 : 0;
}

void Trace::set_validator_awake(std::uint32_t v, Round r, bool awake) {
  if (r < validator_awake_.at(v).size()) validator_awake_[v][r] = awake ? 1 : 0;
}

const Log& Trace::log_at(std::uint32_t client, Round r) const {
  static const Log genesis;
  const auto& changes = logs_.at(client);
  auto it = std::upper_bound(changes.begin(), changes.end(), r,
                             [](Round x, const std::pair<Round, Log>& c) { return x < c.first; });
  if (it == changes.begin()) return genesis;
  return std::prev(it)->second;
}

bool Trace::client_awake(std::uint32_t client, Round r) const {
  const auto& a = client_awake_.at(client);
  return r < a.size() ? a[r] != 0 : true;
}

bool Trace::validator_awake(std::uint32_t v, Round r) const {
  const auto& a = validator_awake_.at(v);
  return r < a.size() ? a[r] != 0 : true;
}

std::size_t Trace::min_awake_validators() const {
  std::size_t best = meta_.n;
  for (Round r = 0; r <= meta_.horizon; ++r) {
    std::size_t count = 0;
    for (std::uint32_t v = 0; v < meta_.n; ++v) count += validator_awake(v, r) ? 1 : 0;
    best = std::min(best, count);
  }
  return best;
}

double Trace::beta() const {
  auto w = min_awake_validators();
  if (w == 0) return meta_.f == 0 ? 0.0 : 1.0;
  return static_cast<double>(meta_.f) / static_cast<double>(w);
}

void Trace::write(std::ostream& os) const {
  os << "# meta n=" << meta_.n << " f=" << meta_.f << " clients=" << meta_.clients << " delta=" << meta_.delta
     << " horizon=" << meta_.horizon << " seed=" << meta_.seed << " latency=" << meta_.declared_latency
     << " protocol=" << (meta_.protocol.empty() ? "-" : meta_.protocol)
     << " validator_model=" << to_string(meta_.models.validator_model)
     << " client_sleep=" << to_string(meta_.models.client_sleepiness)
     << " client_mode=" << to_string(meta_.models.client_interactivity) << " corrupted=";
  bool first = true;
  for (std::uint32_t v = 0; v < meta_.n; ++v) {
    if (!meta_.corrupted[v]) continue;
    os << (first ? "" : ",") << v;
    first = false;
  }
  if (first) os << "-";
  os << "\n";
  for (const auto& [k, v] : meta_.config) os << "# config " << k << "=" << v << "\n";
  std::map<std::uint64_t, const Log*> dict;
  for (const auto& changes : logs_) {
    for (const auto& [r, log] : changes) dict.emplace(log.digest(), &log);
  }
  for (const auto& [d, log] : dict) os << "#log " << hex(d) << " " << log->str() << "\n";
  for (const auto& e : events_) {
    os << e.round << "|" << to_string(e.kind) << "|" << e.from.str() << "|" << e.to.str() << "|" << hex(e.digest)
       << "\n";
  }
}

Trace Trace::read(std::istream& is) {
  TraceMeta meta;
  std::unordered_map<std::uint64_t, Log> dict;
  std::vector<Event> events;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# meta ", 0) == 0) {
      for (auto kv : split(std::string_view(line).substr(7), ' ')) {
        auto eq = kv.find('=');
        if (eq == std::string_view::npos) continue;
        auto key = kv.substr(0, eq);
        auto val = kv.substr(eq + 1);
        if (key == "n") meta.n = static_cast<std::uint32_t>(to_u64(val));
        else if (key == "f") meta.f = static_cast<std::uint32_t>(to_u64(val));
        else if (key == "clients") meta.clients = static_cast<std::uint32_t>(to_u64(val));
        else if (key == "delta") meta.delta = to_u64(val);
        else if (key == "horizon") meta.horizon = to_u64(val);
        else if (key == "seed") meta.seed = to_u64(val);
        else if (key == "latency") meta.declared_latency = to_u64(val);
        else if (key == "protocol") meta.protocol = val == "-" ? "" : std::string(val);
        else if (key == "validator_model") meta.models.validator_model = val == "sleepy" ? ValidatorModel::Sleepy : ValidatorModel::AlwaysOn;
        else if (key == "client_sleep") meta.models.client_sleepiness = val == "sleepy" ? ClientSleepiness::Sleepy : ClientSleepiness::AlwaysOn;
        else if (key == "client_mode") meta.models.client_interactivity = val == "communicating" ? ClientInteractivity::Communicating : ClientInteractivity::Silent;
        else if (key == "corrupted") {
          meta.corrupted.assign(meta.n, false);
          if (val != "-") {
            for (auto idx : split(val, ',')) meta.corrupted.at(to_u64(idx)) = true;
          }
        }
      }
    } else if (line.rfind("# config ", 0) == 0) {
      std::string_view kv = std::string_view(line).substr(9);
      auto eq = kv.find('=');
      if (eq != std::string_view::npos) meta.config.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    } else if (line.rfind("#log ", 0) == 0) {
      auto parts = split(std::string_view(line).substr(5), ' ');
      if (parts.size() != 2) throw std::invalid_argument("bad log dictionary line");
      dict.emplace(to_u64(parts[0], 16), Log::parse(parts[1]));
    } else if (line[0] == '#') {
      continue;
    } else {
      auto f = split(line, '|');
      if (f.size() != 5) throw std::invalid_argument("bad event line: " + line);
      auto from = PartyId::parse(f[2]);
      auto to = PartyId::parse(f[3]);
      if (!from || !to) throw std::invalid_argument("bad party in event line: " + line);
      events.push_back({to_u64(f[0]), kind_from(f[1]), *from, *to, to_u64(f[4], 16)});
    }
  }

  Trace t(meta);
  std::vector<bool> client_state(meta.clients, true);
  std::vector<bool> validator_state(meta.n, true);
  Round cursor = 0;
  auto fill_until = [&](Round r) {
    for (; cursor < r && cursor <= meta.horizon; ++cursor) {
      for (std::uint32_t c = 0; c < meta.clients; ++c) t.set_client_awake(c, cursor, client_state[c]);
      for (std::uint32_t v = 0; v < meta.n; ++v) t.set_validator_awake(v, cursor, validator_state[v]);
    }
  };
  for (const auto& e : events) {
    fill_until(e.round);
    switch (e.kind) {
      case EventKind::Wake:
      case EventKind::Sleep: {
        bool awake = e.kind == EventKind::Wake;
        if (e.from.is_client()) client_state.at(e.from.index) = awake;
        else if (e.from.is_validator()) validator_state.at(e.from.index) = awake;
        t.add_event(e);
        break;
      }
      case EventKind::Output: {
        auto it = dict.find(e.digest);
        if (it == dict.end()) throw std::invalid_argument("output event references unknown log");
        t.record_log(e.from.index, e.round, it->second);
        break;
      }
      case EventKind::Input:
        t.add_receipt({e.digest, e.round, e.to});
        t.add_event(e);
        break;
      default:
        t.add_event(e);
    }
  }
  fill_until(meta.horizon + 1);
  return t;
}

SafetyVerdict check_safety(const Trace& trace) {
  struct Seen {
    PartyId who;
    Round round;
    const Log* log;
  };
  std::vector<Seen> distinct;
  std::unordered_map<std::uint64_t, std::size_t> by_digest;
  for (std::uint32_t c = 0; c < trace.meta().clients; ++c) {
    static const Log genesis;
    const auto& changes = trace.log_changes(c);
    if (changes.empty() || changes.front().first > 0) {
      if (by_digest.emplace(genesis.digest(), distinct.size()).second) {
        distinct.push_back({PartyId::client(c), 0, &genesis});
      }
    }
    for (const auto& [r, log] : changes) {
      if (r > trace.meta().horizon) continue;
      auto [it, fresh] = by_digest.emplace(log.digest(), distinct.size());
      if (fresh || !(*distinct[it->second].log == log)) distinct.push_back({PartyId::client(c), r, &log});
    }
  }
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    for (std::size_t j = i + 1; j < distinct.size(); ++j) {
      if (is_consistent(*distinct[i].log, *distinct[j].log)) continue;
      SafetyVerdict v;
      v.safe = false;
      v.witness = SafetyWitness{distinct[i].who,  distinct[i].round, *distinct[i].log,
                                distinct[j].who,  distinct[j].round, *distinct[j].log};
      return v;
    }
  }
  return {};
}

LivenessVerdict check_liveness(const Trace& trace, Round u) {
  const auto& meta = trace.meta();
  std::map<TxId, Round> first_receipt;
  for (const auto& rc : trace.receipts()) {
    bool eligible = false;
    if (rc.recipient.is_validator()) eligible = trace.honest_validator(rc.recipient.index);
    else if (rc.recipient.is_client()) eligible = meta.models.communicating();
    if (!eligible) continue;
    auto [it, fresh] = first_receipt.emplace(rc.tx, rc.round);
    if (!fresh) it->second = std::min(it->second, rc.round);
  }
  for (std::uint32_t c = 0; c < meta.clients; ++c) {
    // awake_since[r]: first round of the awake streak containing r.
    std::vector<Round> awake_since(meta.horizon + 1, std::numeric_limits<Round>::max());
    for (Round r = 0; r <= meta.horizon; ++r) {
      if (!trace.client_awake(c, r)) continue;
      awake_since[r] = (r > 0 && trace.client_awake(c, r - 1)) ? awake_since[r - 1] : r;
    }
    for (const auto& [tx, r0] : first_receipt) {
      for (Round r = r0 + u + 1; r <= meta.horizon; ++r) {
        if (awake_since[r] > r - u) continue;
        if (trace.log_at(c, r).contains(tx)) continue;
        LivenessVerdict v;
        v.live = false;
        v.witness = LivenessWitness{tx, r0, PartyId::client(c), r};
        return v;
      }
    }
  }
  return {};
}

Verdict check(const Trace& trace, Round u) { return {check_safety(trace), check_liveness(trace, u)}; }

bool witness_replays(const Trace& trace, const SafetyWitness& w) {
  if (!w.first.is_client() || !w.second.is_client()) return false;
  if (!(trace.log_at(w.first.index, w.first_round) == w.first_log)) return false;
  if (!(trace.log_at(w.second.index, w.second_round) == w.second_log)) return false;
  return !is_consistent(w.first_log, w.second_log);
}

}  // namespace reslab
