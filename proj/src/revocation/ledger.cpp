#include "eidpki/revocation/ledger.hpp"

#include <array>

#include "eidpki/core/error.hpp"

namespace eidpki::revocation {

namespace {

constexpr std::array<std::pair<RevocationReason, std::string_view>, 5> kReasons{{
    {RevocationReason::key_compromise, "key_compromise"},
    {RevocationReason::card_lost, "card_lost"},
    {RevocationReason::superseded, "superseded"},
    {RevocationReason::cessation, "cessation"},
    {RevocationReason::administrative, "administrative"},
}};

}  // namespace

std::string_view to_string(RevocationReason reason) {
  for (const auto& [r, name] : kReasons) {
    if (r == reason) return name;
  }
  return "administrative";
}

RevocationReason reason_from_string(std::string_view name) {
  for (const auto& [r, n] : kReasons) {
    if (n == name) return r;
  }
  throw Error("request-malformed", "unknown revocation reason " + std::string(name));
}

const RevocationEntry* RevocationState::find(std::uint64_t serial) const {
  auto it = entries_.find(serial);
  return it == entries_.end() ? nullptr : &it->second;
}

bool RevocationState::record(std::uint64_t serial, RevocationEntry entry) {
  if (!entries_.emplace(serial, entry).second) return false;
  ++version_;
  return true;
}

std::string_view to_string(SerialState state) {
  switch (state) {
    case SerialState::valid: return "valid";
    case SerialState::revoked: return "revoked";
    case SerialState::expired: return "expired";
    case SerialState::not_yet_valid: return "not_yet_valid";
    case SerialState::never_issued: return "never_issued";
  }
  return "never_issued";
}

SerialState classify(std::uint64_t serial, const RevocationState& state, const IssuedIndex& index, UnixTime at) {
  auto it = index.find(serial);
  if (it == index.end()) return SerialState::never_issued;
  const CertificateFields& f = it->second.fields;
  if (at > f.not_after) return SerialState::expired;
  if (const RevocationEntry* e = state.find(serial); e != nullptr && e->revoked_at <= at) return SerialState::revoked;
  if (at < f.not_before) return SerialState::not_yet_valid;
  return SerialState::valid;
}

}  // namespace eidpki::revocation
