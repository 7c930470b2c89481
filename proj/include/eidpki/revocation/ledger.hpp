#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "eidpki/core/certificate.hpp"

namespace eidpki::revocation {

enum class RevocationReason { key_compromise, card_lost, superseded, cessation, administrative };

std::string_view to_string(RevocationReason reason);
RevocationReason reason_from_string(std::string_view name);

struct RevocationEntry {
  RevocationReason reason = RevocationReason::administrative;
  UnixTime revoked_at = 0;

  friend bool operator==(const RevocationEntry&, const RevocationEntry&) = default;
};

// Certificates issued by one CA, keyed by serial.
using IssuedIndex = std::map<std::uint64_t, Certificate>;

// Per-CA revocation ledger. Single writer; readers copy or hold the owning
// lock. version increases on every effective mutation.
class RevocationState {
 public:
  RevocationState() = default;
  explicit RevocationState(std::string ca_id) : ca_id_(std::move(ca_id)) {}

  const std::string& ca_id() const { return ca_id_; }
  std::uint64_t version() const { return version_; }
  const std::map<std::uint64_t, RevocationEntry>& entries() const { return entries_; }
  const RevocationEntry* find(std::uint64_t serial) const;

  // Returns false (and leaves the ledger untouched) if the serial is already
  // present; the first revocation wins.
  bool record(std::uint64_t serial, RevocationEntry entry);

 private:
  std::string ca_id_;
  std::map<std::uint64_t, RevocationEntry> entries_;
  std::uint64_t version_ = 0;
};

// Where a serial stands at a point in time. Every issued serial falls in
// exactly one of valid / revoked / expired / not_yet_valid.
enum class SerialState { valid, revoked, expired, not_yet_valid, never_issued };

std::string_view to_string(SerialState state);

// Expiry supersedes revocation; a revocation counts from its revoked_at.
SerialState classify(std::uint64_t serial, const RevocationState& state, const IssuedIndex& index, UnixTime at);

}  // namespace eidpki::revocation
