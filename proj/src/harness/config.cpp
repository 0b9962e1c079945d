#include <charconv>
#include <fstream>
#include <sstream>

#include "reslab/harness.hpp"

namespace reslab::harness {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) throw ConfigError(key, "expected an unsigned integer, got '" + v + "'");
  return out;
}

std::uint32_t to_u32(const std::string& key, const std::string& v) {
  auto x = to_u64(key, v);
  if (x > 0xffffffffULL) throw ConfigError(key, "out of range");
  return static_cast<std::uint32_t>(x);
}

double to_prob(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) throw ConfigError(key, "expected a number, got '" + v + "'");
  if (out < 0.0 || out > 1.0) throw ConfigError(key, "must lie in [0,1]");
  return out;
}

Fraction to_fraction(const std::string& key, const std::string& v) {
  try {
    return Fraction::parse(v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false");
}

std::string num(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

std::string one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
  for (const auto* a : allowed) {
    if (v == a) return v;
  }
  std::string list;
  for (const auto* a : allowed) list += (list.empty() ? "" : "|") + std::string(a);
  throw ConfigError(key, "expected " + list + ", got '" + v + "'");
}

}  // namespace

void ScenarioConfig::set(const std::string& key, const std::string& value) {
  if (key.rfind("attack.", 0) == 0) {
    if (key.size() == 7) throw ConfigError(key, "empty attack parameter name");
    attack_params[key.substr(7)] = value;
  } else if (key == "protocol") {
    protocol = one_of(key, value, {"int", "goldfish", "ds", "frz", "liveq", "livestar", "livephi"});
  } else if (key == "engine") {
    engine = one_of(key, value, {"int", "goldfish"});
  } else if (key == "n") {
    n = to_u32(key, value);
  } else if (key == "f") {
    f = to_u32(key, value);
  } else if (key == "clients") {
    clients = to_u32(key, value);
  } else if (key == "delta") {
    delta = to_u64(key, value);
  } else if (key == "horizon") {
    horizon = to_u64(key, value);
  } else if (key == "seed") {
    seed = to_u64(key, value);
  } else if (key == "q") {
    q = to_u64(key, value);
  } else if (key == "phi") {
    phi = to_fraction(key, value);
  } else if (key == "kappa") {
    kappa = to_u32(key, value);
  } else if (key == "fcr") {
    fcr = one_of(key, value, {"maxchild", "threshold"}) == "maxchild" ? goldfish::Rule::MaxChild
                                                                      : goldfish::Rule::Threshold;
  } else if (key == "latency") {
    latency = to_u64(key, value);
  } else if (key == "validators") {
    models.validator_model =
        one_of(key, value, {"alwayson", "sleepy"}) == "sleepy" ? ValidatorModel::Sleepy : ValidatorModel::AlwaysOn;
  } else if (key == "client_sleep") {
    models.client_sleepiness =
        one_of(key, value, {"alwayson", "sleepy"}) == "sleepy" ? ClientSleepiness::Sleepy : ClientSleepiness::AlwaysOn;
  } else if (key == "client_mode") {
    models.client_interactivity = one_of(key, value, {"silent", "communicating"}) == "communicating"
                                      ? ClientInteractivity::Communicating
                                      : ClientInteractivity::Silent;
  } else if (key == "corrupt") {
    corrupt = one_of(key, value, {"random", "first", "last"});
  } else if (key == "adversary") {
    adversary = one_of(key, value, {"none", "delay", "fuzz"});
  } else if (key == "equivocate") {
    equivocate = to_prob(key, value);
  } else if (key == "withhold") {
    withhold = to_prob(key, value);
  } else if (key == "spoof") {
    spoof = to_prob(key, value);
  } else if (key == "forge") {
    forge = to_bool(key, value);
  } else if (key == "attack") {
    attack = value;
  } else if (key == "txs") {
    txs = to_u32(key, value);
  } else if (key == "tx_start") {
    tx_start = to_u64(key, value);
  } else if (key == "tx_every") {
    tx_every = to_u64(key, value);
  } else if (key == "tx_to") {
    tx_to = one_of(key, value, {"validator", "client", "all"});
  } else if (key == "sleep") {
    sleep = one_of(key, value, {"none", "random", "fixed"});
  } else if (key == "sleep_rate") {
    sleep_rate = to_prob(key, value);
  } else if (key == "beta") {
    beta = to_fraction(key, value);
  } else {
    throw ConfigError(key, "unknown key");
  }
}

void ScenarioConfig::validate() const {
  if (n == 0) throw ConfigError("n", "must be positive");
  if (n > 1000) throw ConfigError("n", "at most 1000 validators");
  if (f > n) throw ConfigError("f", "f=" + std::to_string(f) + " exceeds n=" + std::to_string(n));
  if (delta == 0) throw ConfigError("delta", "must be positive");
  if (horizon == 0) throw ConfigError("horizon", "must be positive");
  if (tx_every == 0 && txs > 1) throw ConfigError("tx_every", "must be positive");
  const bool gadget = protocol == "frz" || protocol == "liveq" || protocol == "livestar" || protocol == "livephi";
  const std::string eng = engine.empty() ? (protocol == "livephi" ? "goldfish" : "int") : engine;
  const bool uses_int = protocol == "int" || (gadget && eng == "int");
  if (uses_int && (q == 0 || q > n)) throw ConfigError("q", "quorum must lie in [1, n]");
  if (protocol == "frz" && engine == "goldfish") throw ConfigError("engine", "the freezing gadget needs the certifiable engine");
  if (!gadget && !engine.empty()) throw ConfigError("engine", "only gadgets take an engine");
  if (phi.num == 0 || phi.num > phi.den) throw ConfigError("phi", "must lie in (0, 1]");
  if ((protocol == "frz" || protocol == "livestar" || protocol == "ds") && !models.communicating()) {
    throw ConfigError("client_mode", protocol + " needs communicating clients");
  }
  if (sleep != "none" && models.validator_model == ValidatorModel::AlwaysOn &&
      models.client_sleepiness == ClientSleepiness::AlwaysOn) {
    throw ConfigError("sleep", "sleep schedule requested under always-on models");
  }
  if (sleep == "fixed" && !beta) throw ConfigError("beta", "fixed schedules need a target beta");
  if (attack.empty()) return;
  bool known = false;
  for (const auto& a : adv::attack_registry()) known = known || a.name == attack;
  if (!known) throw ConfigError("attack", "unknown attack '" + attack + "'");
}

std::vector<std::pair<std::string, std::string>> ScenarioConfig::pairs() const {
  std::vector<std::pair<std::string, std::string>> out = {
      {"protocol", protocol},
      {"n", std::to_string(n)},
      {"f", std::to_string(f)},
      {"clients", std::to_string(clients)},
      {"delta", std::to_string(delta)},
      {"horizon", std::to_string(horizon)},
      {"seed", std::to_string(seed)},
      {"q", std::to_string(q)},
      {"phi", phi.str()},
      {"kappa", std::to_string(kappa)},
      {"fcr", fcr == goldfish::Rule::MaxChild ? "maxchild" : "threshold"},
      {"validators", to_string(models.validator_model)},
      {"client_sleep", to_string(models.client_sleepiness)},
      {"client_mode", to_string(models.client_interactivity)},
      {"corrupt", corrupt},
      {"adversary", adversary},
      {"equivocate", num(equivocate)},
      {"withhold", num(withhold)},
      {"spoof", num(spoof)},
      {"forge", forge ? "true" : "false"},
      {"txs", std::to_string(txs)},
      {"tx_start", std::to_string(tx_start)},
      {"tx_every", std::to_string(tx_every)},
      {"tx_to", tx_to},
      {"sleep", sleep},
      {"sleep_rate", num(sleep_rate)},
  };
  if (!engine.empty()) out.emplace_back("engine", engine);
  if (latency) out.emplace_back("latency", std::to_string(*latency));
  if (beta) out.emplace_back("beta", beta->str());
  if (!attack.empty()) out.emplace_back("attack", attack);
  for (const auto& [k, v] : attack_params) out.emplace_back("attack." + k, v);
  return out;
}

std::string ScenarioConfig::str() const {
  std::string out;
  for (const auto& [k, v] : pairs()) out += k + "=" + v + "\n";
  return out;
}

ScenarioConfig ScenarioConfig::parse(std::string_view text) {
  ScenarioConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key=value");
    cfg.set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
  return cfg;
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::vector<std::uint32_t> parse_f_range(std::string_view s) {
  std::vector<std::uint32_t> out;
  const std::string text = trim(s);
  if (text.empty()) throw ConfigError("f_range", "empty range");
  if (auto dots = text.find(".."); dots != std::string::npos) {
    auto lo = to_u32("f_range", text.substr(0, dots));
    auto hi = to_u32("f_range", text.substr(dots + 2));
    if (lo > hi) throw ConfigError("f_range", "empty range " + text);
    for (auto f = lo; f <= hi; ++f) out.push_back(f);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_u32("f_range", trim(item)));
  return out;
}

}  // namespace reslab::harness
