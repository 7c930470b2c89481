#include "eidpki/core/certificate.hpp"

#include <array>

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki {

namespace {

constexpr std::array<std::pair<Profile, std::string_view>, 6> kProfileNames{{
    {Profile::ca, "ca"},
    {Profile::identity_auth, "identity_auth"},
    {Profile::signature, "signature"},
    {Profile::encryption, "encryption"},
    {Profile::attribute, "attribute"},
    {Profile::device, "device"},
}};

void require_present(bool ok, const char* field) {
  if (!ok) throw Error("encoding-error", std::string("missing mandatory field ") + field);
}

}  // namespace

std::string_view to_string(Profile profile) {
  for (const auto& [p, name] : kProfileNames) {
    if (p == profile) return name;
  }
  return "unknown";
}

Profile profile_from_string(std::string_view name) {
  for (const auto& [p, n] : kProfileNames) {
    if (n == name) return p;
  }
  throw Error("decode-error", "unknown profile " + std::string(name));
}

Bytes canonical_tbs_encode(const CertificateFields& f) {
  require_present(f.serial != 0, "serial");
  require_present(!f.subject_id.empty(), "subject_id");
  require_present(!f.issuer_id.empty(), "issuer_id");
  require_present(!f.public_key.empty(), "public_key");
  require_present(!f.scheme_id.empty(), "scheme_id");
  require_present(!f.policy_id.empty(), "policy_id");
  require_present(f.key_length_bits != 0, "key_length_bits");

  RecordWriter w;
  w.u64("serial", f.serial)
      .str("subject_id", f.subject_id)
      .str("issuer_id", f.issuer_id)
      .str("profile", to_string(f.profile))
      .bytes("public_key", f.public_key)
      .str("scheme_id", f.scheme_id)
      .u64("key_length_bits", f.key_length_bits)
      .i64("not_before", f.not_before)
      .i64("not_after", f.not_after)
      .str("policy_id", f.policy_id);
  if (f.role_attributes) w.bytes("role_attributes", encode_string_map(*f.role_attributes));
  return w.finish();
}

Bytes Certificate::encode() const {
  Bytes out = length_prefixed(tbs());
  append(out, length_prefixed(signature));
  return out;
}

Certificate Certificate::decode(ByteView encoded) {
  const auto parts = decode_list(encoded);
  if (parts.size() != 2) throw Error("decode-error", "certificate must hold tbs and signature");
  RecordReader r(parts[0]);
  Certificate cert;
  CertificateFields& f = cert.fields;
  f.serial = r.u64("serial");
  f.subject_id = r.str("subject_id");
  f.issuer_id = r.str("issuer_id");
  f.profile = profile_from_string(r.str("profile"));
  f.public_key = r.bytes("public_key");
  f.scheme_id = r.str("scheme_id");
  f.key_length_bits = static_cast<std::uint32_t>(r.u64("key_length_bits"));
  f.not_before = r.i64("not_before");
  f.not_after = r.i64("not_after");
  f.policy_id = r.str("policy_id");
  if (r.has("role_attributes")) f.role_attributes = decode_string_map(r.bytes("role_attributes"));
  if (r.fields().size() != (f.role_attributes ? 11u : 10u)) throw Error("decode-error", "unexpected tbs field");
  cert.signature = parts[1];
  if (cert.tbs() != parts[0]) throw Error("decode-error", "tbs is not canonical");
  return cert;
}

Certificate sign_certificate(const KeyPair& issuer_key, CertificateFields fields) {
  if (fields.not_before >= fields.not_after) throw Error("invalid-validity", "not_before must precede not_after");
  const bool is_attribute = fields.profile == Profile::attribute;
  if (fields.role_attributes.has_value() != is_attribute) {
    throw Error("request-malformed", "role_attributes are present iff profile is attribute");
  }
  Certificate cert{std::move(fields), {}};
  cert.signature = sign_message(issuer_key, cert.tbs());
  return cert;
}

bool verify_certificate_signature(const Certificate& cert, ByteView issuer_public_key,
                                  std::string_view issuer_scheme_id) {
  try {
    return verify_message(issuer_scheme_id, issuer_public_key, cert.tbs(), cert.signature);
  } catch (const Error&) {
    return false;
  }
}

}  // namespace eidpki
