#include <doctest.h>

#include <array>
#include <set>
#include <string>

#include "reslab/cryptosim.hpp"

using namespace reslab;
using namespace reslab::crypto;

TEST_CASE("honest signatures verify against their own payload only") {
  Registry reg(42, std::vector<bool>(6, false));
  auto sig = reg.sign(Principal::validator(2), 2, "x");
  CHECK(reg.verify(PartyId::validator(2), "x", sig));
  CHECK_FALSE(reg.verify(PartyId::validator(2), "y", sig));
  CHECK_FALSE(reg.verify(PartyId::validator(3), "x", sig));
  CHECK(reg.honestly_signed(2, stable_hash("x")));
  CHECK_FALSE(reg.honestly_signed(2, stable_hash("y")));
}

TEST_CASE("corruption hands keys to the adversary and nothing else") {
  std::vector<bool> corrupted(6, false);
  corrupted[5] = true;
  Registry reg(42, corrupted);
  auto sig = reg.sign(Principal::adversary(), 5, "x");
  CHECK(reg.verify(PartyId::validator(5), "x", sig));
  CHECK_THROWS_AS(reg.sign(Principal::adversary(), 1, "x"), ForgeryAttempt);
  CHECK_THROWS_AS(reg.sign(Principal::validator(1), 2, "x"), ForgeryAttempt);
  CHECK_THROWS_AS(reg.sign(Principal::validator(9), 9, "x"), ForgeryAttempt);
  CHECK_THROWS_AS(SigningKey().sign("x"), ForgeryAttempt);
}

TEST_CASE("clients never own a verifying signature") {
  Registry reg(42, std::vector<bool>(4, true));
  auto sig = reg.sign(Principal::adversary(), 0, "x");
  CHECK_FALSE(reg.verify(PartyId::client(0), "x", sig));
  Signature claimed{PartyId::client(0), sig.digest, sig.tag};
  CHECK_FALSE(reg.verify(PartyId::client(0), "x", claimed));
}

TEST_CASE("tags depend on the world secret") {
  Registry a(1, std::vector<bool>(4, false));
  Registry b(2, std::vector<bool>(4, false));
  auto sig = a.sign(Principal::validator(0), 0, "x");
  CHECK_FALSE(b.verify(PartyId::validator(0), "x", sig));
}

TEST_CASE("sign then verify round-trips for every signer and payload") {
  Registry reg(3, std::vector<bool>(8, false));
  for (ValidatorId v = 0; v < 8; ++v) {
    for (int i = 0; i < 50; ++i) {
      const auto payload = "m" + std::to_string(i * 31 + v);
      CHECK(reg.verify(PartyId::validator(v), payload, reg.sign(Principal::validator(v), v, payload)));
    }
  }
}

TEST_CASE("oracle is a deterministic function of seed and input") {
  RandomOracle o(5);
  CHECK(o("leader") == o("leader"));
  CHECK(o(17) == o(17));
  CHECK(o("a") != o("b"));
}

TEST_CASE("oracle outputs spread evenly over eight buckets") {
  RandomOracle o(11);
  std::array<int, 8> buckets{};
  for (std::uint64_t i = 0; i < 1000; ++i) ++buckets[o(i) % 8];
  double chi2 = 0.0;
  for (int b : buckets) chi2 += (b - 125.0) * (b - 125.0) / 125.0;
  // 95th percentile of chi-squared with 7 degrees of freedom.
  CHECK(chi2 < 14.07);
}

TEST_CASE("different seeds give different oracle streams") {
  RandomOracle a(1);
  RandomOracle b(2);
  std::set<std::uint64_t> equal;
  for (std::uint64_t i = 0; i < 100; ++i) {
    if (a(i) == b(i)) equal.insert(i);
  }
  CHECK(equal.empty());
}
