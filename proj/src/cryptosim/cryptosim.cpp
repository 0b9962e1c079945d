#include "reslab/cryptosim.hpp"

#include <string>

namespace reslab::crypto {

Registry::Registry(std::uint64_t world_secret, std::vector<bool> corrupted)
    : secret_(mix64(world_secret ^ 0x5349474eULL)), corrupted_(std::move(corrupted)) {}

std::uint64_t Registry::tag_for(ValidatorId signer, std::uint64_t digest) const {
  return hash_combine(hash_combine(secret_, signer), digest);
}

Signature Registry::sign(Principal caller, ValidatorId signer, std::string_view payload) {
  return sign_digest(caller, signer, stable_hash(payload));
}

Signature Registry::sign_digest(Principal caller, ValidatorId signer, std::uint64_t digest) {
  if (signer >= corrupted_.size()) throw ForgeryAttempt("unknown signer v" + std::to_string(signer));
  bool allowed = caller.kind == Principal::Kind::Validator ? caller.index == signer : corrupted(signer);
  if (!allowed) throw ForgeryAttempt("signature for honest v" + std::to_string(signer) + " requested by another party");
  if (!corrupted(signer)) issued_.emplace(signer, digest);
  return {PartyId::validator(signer), digest, tag_for(signer, digest)};
}

bool Registry::verify(PartyId signer, std::string_view payload, const Signature& sig) const {
  return verify_digest(signer, stable_hash(payload), sig);
}

bool Registry::verify_digest(PartyId signer, std::uint64_t digest, const Signature& sig) const {
  if (!signer.is_validator() || !sig.signer.is_validator()) return false;
  if (signer != sig.signer || sig.digest != digest) return false;
  if (signer.index >= corrupted_.size()) return false;
  return sig.tag == tag_for(static_cast<ValidatorId>(signer.index), digest);
}

Signature SigningKey::sign(std::string_view payload) const {
  if (!reg_) throw ForgeryAttempt("party holds no signing key");
  return reg_->sign(caller_, signer_, payload);
}

Signature SigningKey::sign_digest(std::uint64_t digest) const {
  if (!reg_) throw ForgeryAttempt("party holds no signing key");
  return reg_->sign_digest(caller_, signer_, digest);
}

std::uint64_t RandomOracle::operator()(std::string_view input) const {
  return hash_combine(mix64(seed_ ^ 0x4f52434cULL), stable_hash(input));
}

std::uint64_t RandomOracle::operator()(std::uint64_t input) const {
  ByteWriter w;
  w.u64(input);
  return (*this)(w.bytes());
}

}  // namespace reslab::crypto
