#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "reslab/dolevstrong.hpp"
#include "reslab/gadgets.hpp"
#include "reslab/goldfish.hpp"
#include "reslab/harness.hpp"
#include "reslab/internal_protocol.hpp"

namespace reslab::harness {

namespace {

const goldfish::GoldfishProtocol* goldfish_engine(const net::Protocol& p) {
  if (const auto* g = dynamic_cast<const goldfish::GoldfishProtocol*>(&p)) return g;
  if (const auto* gp = dynamic_cast<const gadgets::GadgetProtocol*>(&p)) {
    return dynamic_cast<const goldfish::GoldfishProtocol*>(&gp->engine());
  }
  return nullptr;
}

std::vector<bool> choose_corrupted(const ScenarioConfig& cfg) {
  std::vector<bool> out(cfg.n, false);
  std::vector<std::uint32_t> order(cfg.n);
  std::iota(order.begin(), order.end(), 0);
  if (cfg.corrupt == "random") {
    std::mt19937_64 rng(hash_combine(cfg.seed, 0x636f7272ULL));
    std::shuffle(order.begin(), order.end(), rng);
  } else if (cfg.corrupt == "last") {
    std::reverse(order.begin(), order.end());
  }
  for (std::uint32_t i = 0; i < cfg.f; ++i) out[order[i]] = true;
  return out;
}

std::vector<net::TxInjection> make_injections(const ScenarioConfig& cfg, const std::vector<bool>& corrupted) {
  std::mt19937_64 rng(hash_combine(cfg.seed, 0x696e6a65ULL));
  std::vector<PartyId> honest;
  for (std::uint32_t v = 0; v < cfg.n; ++v) {
    if (!corrupted[v]) honest.push_back(PartyId::validator(v));
  }
  std::vector<net::TxInjection> out;
  for (std::uint32_t i = 0; i < cfg.txs; ++i) {
    const Round at = cfg.tx_start + static_cast<Round>(i) * cfg.tx_every;
    if (at > cfg.horizon) break;
    net::TxInjection inj{at, static_cast<TxId>(i + 1), {}};
    const bool to_client = cfg.tx_to == "client" || honest.empty();
    if (to_client && cfg.clients > 0) {
      inj.recipients.push_back(PartyId::client(std::uniform_int_distribution<std::uint32_t>(0, cfg.clients - 1)(rng)));
    } else if (cfg.tx_to == "all") {
      inj.recipients = honest;
    } else if (!honest.empty()) {
      inj.recipients.push_back(honest[std::uniform_int_distribution<std::size_t>(0, honest.size() - 1)(rng)]);
    }
    out.push_back(std::move(inj));
  }
  return out;
}

// Sleep intervals with the given long-run asleep fraction.
std::vector<std::uint8_t> random_awake(std::mt19937_64& rng, Round horizon, Round delta, double rate) {
  std::vector<std::uint8_t> awake(horizon + 1, 1);
  if (rate <= 0.0) return awake;
  const Round lo = 2 * delta;
  const Round hi = 8 * delta;
  const double mean = static_cast<double>(lo + hi) / 2.0;
  const double p = std::min(1.0, rate / (mean * std::max(1e-9, 1.0 - rate)));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (Round r = 0; r <= horizon;) {
    if (coin(rng) < p) {
      const Round len = std::uniform_int_distribution<Round>(lo, hi)(rng);
      for (Round k = r; k < r + len && k <= horizon; ++k) awake[k] = 0;
      r += len;
    } else {
      ++r;
    }
  }
  return awake;
}

}  // namespace

std::shared_ptr<const net::Protocol> make_protocol(const ScenarioConfig& cfg) {
  auto internal = [&] { return std::make_shared<sync::InternalProtocol>(sync::Params{cfg.n, cfg.q, cfg.delta}); };
  auto slots = [&] {
    return std::make_shared<goldfish::GoldfishProtocol>(goldfish::Params{cfg.n, cfg.delta, cfg.fcr, cfg.phi, cfg.kappa});
  };
  if (cfg.protocol == "int") return internal();
  if (cfg.protocol == "goldfish") return slots();
  if (cfg.protocol == "ds") return std::make_shared<ds::DolevStrongSmr>(ds::Params{cfg.n, cfg.delta});
  auto kind = gadgets::parse_kind(cfg.protocol);
  if (!kind) throw ConfigError("protocol", "unknown protocol '" + cfg.protocol + "'");
  const std::string eng = cfg.engine.empty() ? (*kind == gadgets::Kind::LivePhi ? "goldfish" : "int") : cfg.engine;
  std::shared_ptr<const net::Engine> engine;
  if (eng == "goldfish") {
    engine = slots();
  } else {
    engine = internal();
  }
  gadgets::Params gp{*kind, cfg.n, cfg.delta, cfg.q, cfg.phi, engine->latency()};
  try {
    return std::make_shared<gadgets::GadgetProtocol>(gp, engine);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("engine", e.what());
  }
}

net::SleepSchedule make_schedule(const ScenarioConfig& cfg, const net::Protocol& protocol,
                                 const std::vector<bool>& corrupted) {
  net::SleepSchedule s;
  if (cfg.sleep == "none") return s;
  std::mt19937_64 rng(hash_combine(cfg.seed, 0x736c6570ULL));
  const Round h = cfg.horizon;
  std::vector<std::uint32_t> honest;
  for (std::uint32_t v = 0; v < cfg.n; ++v) {
    if (!corrupted[v]) honest.push_back(v);
  }

  if (cfg.models.validator_model == ValidatorModel::Sleepy) {
    std::vector<std::vector<std::uint8_t>> awake(cfg.n, std::vector<std::uint8_t>(h + 1, 1));
    std::uint32_t min_awake = cfg.f + 1;
    if (cfg.sleep == "fixed") {
      const auto [f, w] = adv::beta_split(cfg.n, *cfg.beta);
      auto pool = honest;
      std::shuffle(pool.begin(), pool.end(), rng);
      for (std::uint32_t i = 0; i < cfg.n - w && i < pool.size(); ++i) std::fill(awake[pool[i]].begin(), awake[pool[i]].end(), 0);
      min_awake = std::max(min_awake, w);
    } else {
      for (auto v : honest) awake[v] = random_awake(rng, h, cfg.delta, cfg.sleep_rate);
      if (cfg.beta && cfg.f > 0 && cfg.beta->num > 0) {
        // f / |W| <= beta  <=>  |W| >= ceil(f * den / num)
        const auto need = (static_cast<std::int64_t>(cfg.f) * cfg.beta->den + cfg.beta->num - 1) / cfg.beta->num;
        min_awake = std::max<std::uint32_t>(min_awake, static_cast<std::uint32_t>(need));
      }
    }

    // Leaders must be up when their turn starts.
    if (const auto* g = goldfish_engine(protocol)) {
      const Round slot = g->params().slot_length();
      crypto::RandomOracle oracle(cfg.seed);
      for (std::uint64_t t = 0; t * slot <= h; ++t) {
        const auto l = goldfish::leader(oracle, t, cfg.n);
        if (corrupted[l]) continue;
        const Round from = t == 0 ? 0 : (t - 1) * slot;
        for (Round r = from; r < (t + 1) * slot && r <= h; ++r) awake[l][r] = 1;
      }
    } else if (const auto* d = dynamic_cast<const ds::DolevStrongSmr*>(&protocol)) {
      for (Round r = 0; r <= h; r += d->params().period()) {
        for (auto v : honest) awake[v][r] = 1;
      }
    }

    for (Round r = 0; r <= h; ++r) {
      std::uint32_t up = cfg.f;
      std::uint32_t honest_up = 0;
      for (auto v : honest) honest_up += awake[v][r];
      up += honest_up;
      for (auto v : honest) {
        if (up >= min_awake && honest_up > 0) break;
        if (!awake[v][r]) {
          awake[v][r] = 1;
          ++up;
          ++honest_up;
        }
      }
    }
    for (Round r = 0; r <= h; ++r) {
      for (auto v : honest) {
        if (!awake[v][r]) s.set_validator(r, v, false, cfg.n);
      }
    }
  }

  if (cfg.models.client_sleepiness == ClientSleepiness::Sleepy) {
    // Client 0 stays up so every run has a client that liveness is checked against.
    for (std::uint32_t c = 1; c < cfg.clients; ++c) {
      auto awake = random_awake(rng, h, cfg.delta, cfg.sleep_rate);
      for (Round r = 0; r <= h; ++r) {
        if (!awake[r]) s.set_client(r, c, false, cfg.clients);
      }
    }
  }
  return s;
}

bool RunResult::meets_expectation() const {
  if (expected.safe && *expected.safe != verdict.safe()) return false;
  if (expected.live && *expected.live != verdict.live()) return false;
  return true;
}

RunResult run(const ScenarioConfig& input) {
  input.validate();
  ScenarioConfig cfg = input;
  if (cfg.sleep == "fixed" && cfg.models.validator_model == ValidatorModel::Sleepy) {
    cfg.f = adv::beta_split(cfg.n, *cfg.beta).first;
  }
  auto protocol = make_protocol(cfg);

  net::WorldSpec spec;
  spec.n = cfg.n;
  spec.clients = cfg.clients;
  spec.delta = cfg.delta;
  spec.horizon = cfg.horizon;
  spec.seed = cfg.seed;
  spec.models = cfg.models;
  spec.corrupted = choose_corrupted(cfg);

  RunResult result;
  std::unique_ptr<net::Adversary> adversary;
  adv::Fuzz* fuzz = nullptr;
  if (!cfg.attack.empty()) {
    adv::AttackSetup setup{protocol.get(), cfg.n, cfg.f, cfg.models, cfg.seed, cfg.attack_params};
    try {
      auto script = adv::make_attack(cfg.attack, setup);
      script->configure(spec);
      result.expected = script->expected();
      adversary = std::move(script);
    } catch (const adv::AttackError& e) {
      throw ConfigError("attack", e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("attack", e.what());
    }
  } else if (cfg.adversary != "none") {
    adv::FuzzOptions opt;
    if (cfg.adversary == "fuzz") {
      opt.equivocate = cfg.equivocate;
      opt.withhold = cfg.withhold;
      opt.spoof = cfg.spoof;
      if (cfg.forge) opt.forge_q = adv::certifiable_quorum(*protocol).value_or(0);
    } else {
      opt.equivocate = opt.withhold = opt.spoof = 0.0;
    }
    auto f = std::make_unique<adv::Fuzz>(hash_combine(cfg.seed, 0x66757a7aULL), opt);
    fuzz = f.get();
    adversary = std::move(f);
  }

  // Scripted sleep overrides the generated schedule wherever it puts a party to sleep.
  auto schedule = make_schedule(cfg, *protocol, spec.corrupted);
  for (Round r = 0; r < spec.schedule.validators.size(); ++r) {
    for (std::uint32_t v = 0; v < spec.schedule.validators[r].size(); ++v) {
      if (!spec.schedule.validators[r][v]) schedule.set_validator(r, v, false, spec.n);
    }
  }
  for (Round r = 0; r < spec.schedule.clients.size(); ++r) {
    for (std::uint32_t c = 0; c < spec.schedule.clients[r].size(); ++c) {
      if (!spec.schedule.clients[r][c]) schedule.set_client(r, c, false, spec.clients);
    }
  }
  spec.schedule = std::move(schedule);
  auto injections = make_injections(cfg, spec.corrupted);
  spec.injections.insert(spec.injections.end(), injections.begin(), injections.end());

  net::World world(std::move(spec), *protocol, adversary.get());
  try {
    result.trace = world.run();
  } catch (const net::IllegalAction& e) {
    throw ConfigError("schedule", e.what());
  }
  result.trace.meta().config = cfg.pairs();
  result.latency = cfg.latency.value_or(protocol->latency());
  result.verdict = check(result.trace, result.latency);
  if (fuzz) {
    result.forge_attempts = fuzz->forge_attempts();
    result.accepted_forgeries = fuzz->accepted_forgeries();
  }
  return result;
}

std::string client_model_label(const ModelSelector& m) {
  return to_string(m.client_sleepiness) + "-" + to_string(m.client_interactivity);
}

std::string SweepResult::to_csv() const {
  std::string out = "protocol,f_or_beta,client_model,seeds,safe_count,live_count\n";
  for (const auto& r : rows) {
    out += r.protocol + "," + r.f_or_beta + "," + r.client_model + "," + std::to_string(r.seeds) + "," +
           std::to_string(r.safe_count) + "," + std::to_string(r.live_count) + "\n";
  }
  return out;
}

SweepResult SweepResult::parse_csv(std::string_view csv) {
  SweepResult out;
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != "protocol,f_or_beta,client_model,seeds,safe_count,live_count") {
    throw ConfigError("csv", "missing or unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw ConfigError("csv", "expected 6 cells in '" + line + "'");
    try {
      out.rows.push_back({cells[0], cells[1], cells[2], static_cast<std::uint32_t>(std::stoul(cells[3])),
                          static_cast<std::uint32_t>(std::stoul(cells[4])),
                          static_cast<std::uint32_t>(std::stoul(cells[5]))});
    } catch (const std::exception&) {
      throw ConfigError("csv", "bad count in '" + line + "'");
    }
  }
  return out;
}

SweepResult sweep(const ScenarioConfig& base, const std::vector<std::uint32_t>& f_values, std::uint32_t seeds) {
  if (f_values.empty()) throw ConfigError("f_range", "empty range");
  if (seeds == 0) throw ConfigError("seeds", "need at least one seed");
  SweepResult out;
  for (auto f : f_values) {
    SweepRow row{base.protocol, std::to_string(f), client_model_label(base.models), seeds, 0, 0};
    for (std::uint32_t i = 0; i < seeds; ++i) {
      auto cfg = base;
      cfg.f = f;
      cfg.seed = base.seed + i;
      auto res = run(cfg);
      row.safe_count += res.verdict.safe() ? 1 : 0;
      row.live_count += res.verdict.live() ? 1 : 0;
    }
    out.rows.push_back(row);
  }
  return out;
}

ScenarioConfig strengthen(const ScenarioConfig& weaker, Coordinate c) {
  auto out = weaker;
  switch (c) {
    case Coordinate::ClientInteractivity:
      out.models.client_interactivity = ClientInteractivity::Communicating;
      break;
    case Coordinate::ValidatorSleepiness:
      out.models.validator_model = ValidatorModel::AlwaysOn;
      break;
    case Coordinate::ClientSleepiness:
      out.models.client_sleepiness = ClientSleepiness::AlwaysOn;
      break;
  }
  if (out.models.validator_model == ValidatorModel::AlwaysOn &&
      out.models.client_sleepiness == ClientSleepiness::AlwaysOn) {
    out.sleep = "none";
  }
  return out;
}

bool hierarchy_check(const ScenarioConfig& weaker, const ScenarioConfig& stronger) {
  const std::set<std::string> model_keys = {"validators", "client_sleep", "client_mode", "sleep"};
  auto rest = [&](const ScenarioConfig& c) {
    std::vector<std::pair<std::string, std::string>> out;
    for (auto& kv : c.pairs()) {
      if (!model_keys.count(kv.first)) out.push_back(kv);
    }
    return out;
  };
  if (weaker.n != stronger.n) throw ConfigError("n", "hierarchy runs must share n");
  if (rest(weaker) != rest(stronger)) throw ConfigError("hierarchy", "configs differ outside the model coordinates");
  const auto& a = weaker.models;
  const auto& b = stronger.models;
  int changed = 0;
  bool interactivity_only = false;
  if (a.client_interactivity != b.client_interactivity) {
    if (b.client_interactivity != ClientInteractivity::Communicating) {
      throw ConfigError("client_mode", "strengthening goes from silent to communicating");
    }
    ++changed;
    interactivity_only = true;
  }
  if (a.validator_model != b.validator_model) {
    if (b.validator_model != ValidatorModel::AlwaysOn) throw ConfigError("validators", "strengthening goes from sleepy to always-on");
    ++changed;
  }
  if (a.client_sleepiness != b.client_sleepiness) {
    if (b.client_sleepiness != ClientSleepiness::AlwaysOn) throw ConfigError("client_sleep", "strengthening goes from sleepy to always-on");
    ++changed;
  }
  if (changed != 1) throw ConfigError("hierarchy", "exactly one model coordinate must change");
  const auto x = run(weaker);
  const auto y = run(stronger);
  const bool same = x.verdict.safe() == y.verdict.safe() && x.verdict.live() == y.verdict.live();
  if (interactivity_only) return same && x.trace.hash() == y.trace.hash();
  return same;
}

void write_trace(const std::string& path, const Trace& trace) {
  std::ostringstream os;
  trace.write(os);
  const auto text = os.str();
  if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
    gzFile gz = gzopen(path.c_str(), "wb");
    if (!gz) throw ConfigError("trace-out", "cannot open " + path);
    const int wrote = gzwrite(gz, text.data(), static_cast<unsigned>(text.size()));
    gzclose(gz);
    if (wrote != static_cast<int>(text.size())) throw ConfigError("trace-out", "short write to " + path);
    return;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("trace-out", "cannot open " + path);
  out << text;
}

Trace read_trace(const std::string& path) {
  std::string text;
  if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
    gzFile gz = gzopen(path.c_str(), "rb");
    if (!gz) throw ConfigError("trace", "cannot open " + path);
    char buf[1 << 15];
    int got;
    while ((got = gzread(gz, buf, sizeof buf)) > 0) text.append(buf, static_cast<std::size_t>(got));
    gzclose(gz);
    if (got < 0) throw ConfigError("trace", "corrupt gzip stream in " + path);
  } else {
    std::ifstream in(path);
    if (!in) throw ConfigError("trace", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  std::istringstream is(text);
  return Trace::read(is);
}

}  // namespace reslab::harness
