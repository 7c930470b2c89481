#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "eidpki/core/bytes.hpp"
#include "eidpki/core/signature_scheme.hpp"

namespace eidpki {

enum class Profile { ca, identity_auth, signature, encryption, attribute, device };

std::string_view to_string(Profile profile);
// Throws Error("decode-error") for unknown names.
Profile profile_from_string(std::string_view name);

struct CertificateFields {
  std::uint64_t serial = 0;
  std::string subject_id;
  std::string issuer_id;
  Profile profile = Profile::identity_auth;
  Bytes public_key;
  std::string scheme_id;
  std::uint32_t key_length_bits = 0;
  UnixTime not_before = 0;
  UnixTime not_after = 0;
  std::string policy_id;
  std::optional<std::map<std::string, std::string>> role_attributes;

  friend bool operator==(const CertificateFields&, const CertificateFields&) = default;
};

// Canonical to-be-signed bytes. Throws Error("encoding-error") when a
// mandatory field is missing (zero serial, empty identifier or key).
Bytes canonical_tbs_encode(const CertificateFields& fields);

struct Certificate {
  CertificateFields fields;
  Bytes signature;

  Bytes tbs() const { return canonical_tbs_encode(fields); }
  bool self_signed() const { return fields.subject_id == fields.issuer_id; }
  bool valid_at(UnixTime t) const { return fields.not_before <= t && t <= fields.not_after; }

  // Wire/persistence form: u32be(len(tbs)) tbs u32be(len(signature)) signature.
  Bytes encode() const;
  static Certificate decode(ByteView encoded);

  std::string armor() const { return to_hex(encode()); }
  static Certificate from_armor(std::string_view hex) { return decode(from_hex(hex)); }

  friend bool operator==(const Certificate&, const Certificate&) = default;
};

// Throws Error("invalid-validity") when not_before >= not_after and
// Error("request-malformed") when role attributes and profile disagree.
Certificate sign_certificate(const KeyPair& issuer_key, CertificateFields fields);

bool verify_certificate_signature(const Certificate& cert, ByteView issuer_public_key,
                                  std::string_view issuer_scheme_id);

}  // namespace eidpki
