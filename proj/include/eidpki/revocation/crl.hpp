#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eidpki/core/path.hpp"
#include "eidpki/revocation/ledger.hpp"

namespace eidpki::revocation {

struct CrlEntry {
  std::uint64_t serial = 0;
  RevocationReason reason = RevocationReason::administrative;
  UnixTime revoked_at = 0;

  friend bool operator==(const CrlEntry&, const CrlEntry&) = default;
};

struct Crl {
  std::string ca_id;
  UnixTime this_update = 0;
  UnixTime next_update = 0;
  std::uint64_t state_version = 0;
  std::vector<CrlEntry> entries;  // ascending by serial
  Bytes signature;

  Bytes tbs() const;
  Bytes encode() const;
  static Crl decode(ByteView encoded);
  bool verify(const IssuerKey& ca_key) const;
  const CrlEntry* find(std::uint64_t serial) const;
};

// Lists exactly the serials classified revoked at at_time (unexpired).
// Throws Error("invalid-argument") unless validity_window_seconds > 0.
Crl generate_crl(const RevocationState& state, const IssuedIndex& index, const KeyPair& ca_key, UnixTime at_time,
                 UnixTime validity_window_seconds);

// Verifies the CRL signature and freshness, then answers for one
// certificate. Errors: crl-invalid (bad signature or wrong issuer),
// crl-stale (at_time past next_update).
RevocationStatus check_status_via_crl(std::uint64_t serial, const Crl& crl, const Certificate* issued_cert,
                                      const IssuerKey& ca_key, UnixTime at_time);

}  // namespace eidpki::revocation
