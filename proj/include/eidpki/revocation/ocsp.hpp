#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "eidpki/core/path.hpp"
#include "eidpki/revocation/ledger.hpp"

namespace eidpki::revocation {

inline constexpr std::size_t kOcspNonceSize = 16;

struct OcspRequest {
  std::string ca_id;
  std::uint64_t serial = 0;
  Bytes nonce;

  Bytes encode() const;
  static OcspRequest decode(ByteView encoded);
  static OcspRequest make(std::string ca_id, std::uint64_t serial, Random& rng);
};

// status is absent on a protocol error; error then names it.
struct OcspResponse {
  std::string ca_id;
  std::uint64_t serial = 0;
  std::optional<RevocationStatus> status;
  std::optional<UnixTime> revoked_at;
  UnixTime produced_at = 0;
  Bytes nonce;
  std::uint64_t state_version = 0;
  std::string error;
  Bytes signature;

  Bytes tbs() const;
  Bytes encode() const;
  static OcspResponse decode(ByteView encoded);
};

// good: issued, inside its validity window, unrevoked. revoked: revoked and
// unexpired. unknown: never issued, expired or not yet valid.
OcspResponse ocsp_respond(const OcspRequest& request, const RevocationState& state, const IssuedIndex& index,
                          const KeyPair& responder_key, UnixTime at_time);

// Client-side acceptance: responder signature, nonce and serial binding.
// Throws Error("ocsp-invalid") or Error("ocsp-error") for protocol errors.
RevocationStatus accept_ocsp_response(const OcspRequest& request, const OcspResponse& response,
                                      const IssuerKey& responder);

}  // namespace eidpki::revocation
