#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "reslab/bytes.hpp"
#include "reslab/core.hpp"

namespace reslab::crypto {

struct ForgeryAttempt : std::logic_error {
  using std::logic_error::logic_error;
};

struct Signature {
  PartyId signer;
  std::uint64_t digest = 0;
  std::uint64_t tag = 0;

  bool operator==(const Signature&) const = default;
};

// Who is asking for a signature: an honest validator acting for itself, or
// the adversary acting through the keys of corrupted validators.
struct Principal {
  enum class Kind : std::uint8_t { Validator, Adversary } kind = Kind::Adversary;
  ValidatorId index = 0;

  static Principal validator(ValidatorId v) { return {Kind::Validator, v}; }
  static Principal adversary() { return {Kind::Adversary, 0}; }
};

// Per-world key registry. Tags are keyed by a world secret the protocols never
// see, so a verifying signature can only come out of sign().
class Registry {
 public:
  Registry(std::uint64_t world_secret, std::vector<bool> corrupted);

  Signature sign(Principal caller, ValidatorId signer, std::string_view payload);
  Signature sign_digest(Principal caller, ValidatorId signer, std::uint64_t digest);

  bool verify(PartyId signer, std::string_view payload, const Signature& sig) const;
  bool verify_digest(PartyId signer, std::uint64_t digest, const Signature& sig) const;

  bool corrupted(ValidatorId v) const { return v < corrupted_.size() && corrupted_[v]; }
  std::size_t size() const { return corrupted_.size(); }

  // (signer, digest) pairs an honest validator actually signed.
  bool honestly_signed(ValidatorId v, std::uint64_t digest) const { return issued_.count({v, digest}) != 0; }

 private:
  std::uint64_t tag_for(ValidatorId signer, std::uint64_t digest) const;

  std::uint64_t secret_;
  std::vector<bool> corrupted_;
  std::set<std::pair<ValidatorId, std::uint64_t>> issued_;
};

// Signing capability handed to a party; invalid for clients.
class SigningKey {
 public:
  SigningKey() = default;
  SigningKey(Registry* reg, Principal caller, ValidatorId signer) : reg_(reg), caller_(caller), signer_(signer) {}

  bool valid() const { return reg_ != nullptr; }
  ValidatorId signer() const { return signer_; }
  Signature sign(std::string_view payload) const;
  Signature sign_digest(std::uint64_t digest) const;

 private:
  Registry* reg_ = nullptr;
  Principal caller_;
  ValidatorId signer_ = 0;
};

class RandomOracle {
 public:
  explicit RandomOracle(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t operator()(std::string_view input) const;
  std::uint64_t operator()(std::uint64_t input) const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace reslab::crypto
