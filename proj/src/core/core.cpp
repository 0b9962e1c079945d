#include "reslab/core.hpp"

#include <charconv>
#include <numeric>
#include <sstream>

#include "reslab/bytes.hpp"

namespace reslab {

namespace {

std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

std::string PartyId::str() const {
  switch (kind) {
    case PartyKind::Validator: return "v" + std::to_string(index);
    case PartyKind::Client: return "c" + std::to_string(index);
    case PartyKind::Environment: return index == 0 ? "env" : "*";
  }
  return "?";
}

std::optional<PartyId> PartyId::parse(std::string_view s) {
  if (s == "env") return environment();
  if (s == "*") return everyone();
  if (s.size() < 2) return std::nullopt;
  auto idx = parse_u64(s.substr(1));
  if (!idx) return std::nullopt;
  if (s[0] == 'v') return validator(static_cast<std::uint32_t>(*idx));
  if (s[0] == 'c') return client(static_cast<std::uint32_t>(*idx));
  return std::nullopt;
}

std::string to_string(ValidatorModel m) { return m == ValidatorModel::AlwaysOn ? "alwayson" : "sleepy"; }
std::string to_string(ClientSleepiness m) { return m == ClientSleepiness::AlwaysOn ? "alwayson" : "sleepy"; }
std::string to_string(ClientInteractivity m) {
  return m == ClientInteractivity::Silent ? "silent" : "communicating";
}

Fraction Fraction::make(std::int64_t num, std::int64_t den) {
  if (den <= 0 || num < 0) throw std::invalid_argument("fraction must be non-negative with positive denominator");
  auto g = std::gcd(num, den);
  if (g == 0) g = 1;
  return {num / g, den / g};
}

Fraction Fraction::parse(std::string_view s) {
  auto slash = s.find('/');
  if (slash == std::string_view::npos) {
    auto v = parse_u64(s);
    if (!v) throw std::invalid_argument("bad fraction: " + std::string(s));
    return make(static_cast<std::int64_t>(*v), 1);
  }
  auto a = parse_u64(s.substr(0, slash));
  auto b = parse_u64(s.substr(slash + 1));
  if (!a || !b) throw std::invalid_argument("bad fraction: " + std::string(s));
  return make(static_cast<std::int64_t>(*a), static_cast<std::int64_t>(*b));
}

std::string Fraction::str() const { return std::to_string(num) + "/" + std::to_string(den); }

ResiliencePair::ResiliencePair(double live, double safe) : t_live(live), t_safe(safe) {
  if (live < 0.0 || live > 1.0 || safe < 0.0 || safe > 1.0) {
    throw std::invalid_argument("resilience fractions must lie in [0,1]");
  }
}

Log::Log(const std::vector<TxId>& txs) {
  for (auto id : txs) append(id);
}

bool Log::append(TxId id) {
  if (!index_.insert(id).second) return false;
  entries_.push_back(id);
  return true;
}

void Log::append(const Log& other) {
  for (auto id : other.entries_) append(id);
}

std::uint64_t Log::digest() const {
  std::uint64_t h = 0x6c6f67ULL;
  for (auto id : entries_) h = hash_combine(h, id);
  return hash_combine(h, entries_.size());
}

std::string Log::str() const {
  std::string out = "[";
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(entries_[i]);
  }
  return out + "]";
}

Log Log::parse(std::string_view s) {
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') throw std::invalid_argument("bad log: " + std::string(s));
  s = s.substr(1, s.size() - 2);
  Log out;
  while (!s.empty()) {
    auto comma = s.find(',');
    auto item = s.substr(0, comma);
    auto v = parse_u64(item);
    if (!v) throw std::invalid_argument("bad log entry: " + std::string(item));
    out.append(*v);
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  return out;
}

bool is_prefix(const Log& a, const Log& b) {
  if (a.size() > b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

bool is_consistent(const Log& a, const Log& b) { return is_prefix(a, b) || is_prefix(b, a); }

std::string Verdict::str() const {
  std::ostringstream os;
  os << "safety=" << (safety.safe ? "SAFE" : "VIOLATION") << " liveness=" << (liveness.live ? "LIVE" : "VIOLATION");
  std::string evidence;
  if (safety.witness) {
    const auto& w = *safety.witness;
    evidence += "safety:" + w.first.str() + "@" + std::to_string(w.first_round) + w.first_log.str() + "|" +
                w.second.str() + "@" + std::to_string(w.second_round) + w.second_log.str();
  }
  if (liveness.witness) {
    const auto& w = *liveness.witness;
    if (!evidence.empty()) evidence += ";";
    evidence += "liveness:tx" + std::to_string(w.tx) + "@" + std::to_string(w.receipt) + "," + w.starving.str() + "@" +
                std::to_string(w.round);
  }
  if (!evidence.empty()) os << " evidence=" << evidence;
  return os.str();
}

}  // namespace reslab
