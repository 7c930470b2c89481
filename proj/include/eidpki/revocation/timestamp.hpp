#pragma once

#include <cstdint>
#include <mutex>
#include <string>

#include "eidpki/core/certificate.hpp"

namespace eidpki::revocation {

struct TimestampToken {
  Bytes document_hash;  // 32 bytes
  UnixTime time = 0;
  std::uint64_t serial = 0;
  std::string tsa_id;
  Bytes signature;

  Bytes tbs() const;
  Bytes encode() const;
  static TimestampToken decode(ByteView encoded);
  // Signature under the TSA certificate key and subject binding.
  bool verify(const Certificate& tsa_certificate) const;
};

// Time-stamping authority. Serials start at 1 and strictly increase; issued
// times never go backwards even if the clock does.
class TimestampAuthority {
 public:
  TimestampAuthority(Certificate certificate, KeyPair key, std::uint64_t last_serial = 0, UnixTime last_time = 0);

  // Throws Error("request-malformed") unless the hash is 32 bytes.
  TimestampToken issue(ByteView document_hash, UnixTime now);

  // Replay path: advances counters past an already-issued token.
  void restore(std::uint64_t serial, UnixTime time);

  const Certificate& certificate() const { return certificate_; }
  std::uint64_t last_serial() const;

 private:
  Certificate certificate_;
  KeyPair key_;
  mutable std::mutex mutex_;
  std::uint64_t last_serial_;
  UnixTime last_time_;
};

}  // namespace eidpki::revocation
