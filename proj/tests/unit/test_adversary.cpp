#include <doctest.h>

#include <set>

#include "reslab/adversary.hpp"
#include "reslab/harness.hpp"

using namespace reslab;

namespace {

harness::ScenarioConfig cfg_of(const char* text) { return harness::ScenarioConfig::parse(text); }

// Exact search over (f, awake) with error compared as rationals.
std::pair<std::uint32_t, std::uint32_t> split_oracle(std::uint32_t n, Fraction beta) {
  struct Cand {
    std::uint32_t f, awake;
    std::int64_t err_num, err_den;
  };
  std::optional<Cand> best;
  for (std::uint32_t awake = 1; awake <= n; ++awake) {
    for (std::uint32_t f = 0; f < awake; ++f) {
      Cand c{f, awake, std::llabs(static_cast<std::int64_t>(f) * beta.den - beta.num * awake),
             static_cast<std::int64_t>(awake) * beta.den};
      if (!best) {
        best = c;
        continue;
      }
      const auto lhs = c.err_num * best->err_den;
      const auto rhs = best->err_num * c.err_den;
      if (lhs != rhs) {
        if (lhs < rhs) best = c;
        continue;
      }
      const bool sleeps = c.awake < n;
      const bool best_sleeps = best->awake < n;
      if (sleeps != best_sleeps) {
        if (sleeps) best = c;
      } else if (c.f != best->f) {
        if (c.f > best->f) best = c;
      } else if (c.awake > best->awake) {
        best = c;
      }
    }
  }
  return {best->f, best->awake};
}

}  // namespace

TEST_CASE("attack registry lists the five scripted attacks") {
  std::set<std::string> names;
  for (const auto& a : adv::attack_registry()) {
    names.insert(a.name);
    CHECK_FALSE(a.summary.empty());
  }
  CHECK(names == std::set<std::string>{"split_brain", "four_worlds", "sleepy_da_attack", "equivocate_leader", "ghost_tx"});

  auto proto = harness::make_protocol(harness::ScenarioConfig{});
  adv::AttackSetup setup;
  setup.protocol = proto.get();
  setup.n = 4;
  CHECK_THROWS_AS(adv::make_attack("nope", setup), adv::AttackError);
}

TEST_CASE("beta_split frozen values") {
  using P = std::pair<std::uint32_t, std::uint32_t>;
  CHECK(adv::beta_split(8, Fraction::make(1, 2)) == P{3, 6});
  CHECK(adv::beta_split(8, Fraction::make(1, 4)) == P{1, 4});
  CHECK(adv::beta_split(8, Fraction::make(3, 8)) == P{3, 8});
  CHECK(adv::beta_split(10, Fraction::make(3, 10)) == P{3, 10});
}

TEST_CASE("beta_split agrees with an exact search") {
  for (std::uint32_t n = 1; n <= 12; ++n) {
    for (std::int64_t den = 1; den <= 12; ++den) {
      for (std::int64_t num = 0; num <= den; ++num) {
        const auto beta = Fraction::make(num, den);
        CAPTURE(n);
        CAPTURE(beta.str());
        CHECK(adv::beta_split(n, beta) == split_oracle(n, beta));
      }
    }
  }
}

TEST_CASE("certifiable quorum is found through gadgets") {
  harness::ScenarioConfig c;
  c.protocol = "int";
  c.q = 3;
  CHECK(adv::certifiable_quorum(*harness::make_protocol(c)) == std::size_t{3});
  c.protocol = "frz";
  CHECK(adv::certifiable_quorum(*harness::make_protocol(c)) == std::size_t{3});
  c.protocol = "ds";
  CHECK_FALSE(adv::certifiable_quorum(*harness::make_protocol(c)));
  c.protocol = "goldfish";
  CHECK_FALSE(adv::certifiable_quorum(*harness::make_protocol(c)));
}

TEST_CASE("attacks outside their model are config errors") {
  auto da = cfg_of("protocol=goldfish\nn=8\nphi=3/4\nattack=sleepy_da_attack\nvalidators=alwayson\n");
  try {
    harness::run(da);
    FAIL("expected a config error");
  } catch (const harness::ConfigError& e) {
    CHECK(e.field == "attack");
  }
  auto eq = cfg_of("protocol=int\nn=4\nq=3\nf=0\nattack=equivocate_leader\n");
  try {
    harness::run(eq);
    FAIL("expected a config error");
  } catch (const harness::ConfigError& e) {
    CHECK(e.field == "attack");
  }
}

TEST_CASE("split_brain breaks the internal protocol exactly at f = q") {
  auto base = cfg_of("protocol=int\nn=6\nq=4\ndelta=2\nhorizon=120\nclients=2\nattack=split_brain\n");
  base.f = 3;
  auto below = harness::run(base);
  CHECK(below.verdict.safe());
  CHECK(below.meets_expectation());
  base.f = 4;
  auto at = harness::run(base);
  CHECK_FALSE(at.verdict.safe());
  CHECK(at.meets_expectation());
  REQUIRE(at.verdict.safety.witness);
  CHECK(witness_replays(at.trace, *at.verdict.safety.witness));
}

TEST_CASE("sleepy_da_attack on a 3/4 threshold stalls above beta 1/4") {
  auto base = cfg_of("protocol=goldfish\nn=10\nphi=3/4\nkappa=4\ndelta=1\nhorizon=180\nvalidators=sleepy\n"
                     "attack=sleepy_da_attack\n");
  base.attack_params["beta"] = "3/10";
  auto high = harness::run(base);
  CHECK(high.verdict.safe());
  CHECK_FALSE(high.verdict.live());
  CHECK(high.meets_expectation());
  CHECK(high.trace.beta() == doctest::Approx(0.3));

  base.attack_params["beta"] = "1/5";
  auto low = harness::run(base);
  CHECK(low.verdict.safe());
  CHECK(low.verdict.live());
  CHECK(low.meets_expectation());
}

TEST_CASE("forged certificates are accepted once the adversary holds q keys") {
  auto cfg = cfg_of("protocol=int\nn=4\nq=3\ndelta=1\nhorizon=60\nforge=true\n");
  cfg.f = 2;
  auto below = harness::run(cfg);
  CHECK(below.forge_attempts > 0);
  CHECK(below.accepted_forgeries == 0);
  cfg.f = 3;
  auto at = harness::run(cfg);
  CHECK(at.accepted_forgeries > 0);
}

TEST_CASE("fuzz runs are reproducible from the seed") {
  auto cfg = cfg_of("protocol=int\nn=5\nq=3\nf=2\ndelta=2\nhorizon=80\nspoof=0.5\nseed=17\n");
  auto a = harness::run(cfg);
  auto b = harness::run(cfg);
  CHECK(a.trace.hash() == b.trace.hash());
  CHECK(a.trace.client_sends() == 0);
  cfg.seed = 18;
  CHECK(harness::run(cfg).trace.hash() != a.trace.hash());
}
