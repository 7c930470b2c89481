#include "eidpki/ca/policy.hpp"

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki::ca {

void CertificatePolicy::validate() const {
  if (policy_id.empty()) throw Error("policy-invalid", "policy_id required");
  if (allowed_profiles.empty()) throw Error("policy-invalid", "allowed_profiles must be non-empty");
  if (max_validity_days <= 0) throw Error("policy-invalid", "max_validity_days must be positive");
}

Bytes CertificatePolicy::encode() const {
  std::vector<Bytes> profiles;
  for (Profile p : allowed_profiles) profiles.push_back(to_bytes(to_string(p)));
  return RecordWriter()
      .str("policy_id", policy_id)
      .str("title", title)
      .bytes("allowed_profiles", encode_list(profiles))
      .i64("max_validity_days", max_validity_days)
      .str("document_text", document_text)
      .bytes("rfc2527_sections", encode_string_map(rfc2527_sections))
      .finish();
}

CertificatePolicy CertificatePolicy::decode(ByteView encoded) {
  RecordReader r(encoded);
  CertificatePolicy p;
  p.policy_id = r.str("policy_id");
  p.title = r.str("title");
  for (const Bytes& item : decode_list(r.bytes("allowed_profiles"))) {
    p.allowed_profiles.insert(profile_from_string(to_string(item)));
  }
  p.max_validity_days = static_cast<int>(r.i64("max_validity_days"));
  p.document_text = r.str("document_text");
  p.rfc2527_sections = decode_string_map(r.bytes("rfc2527_sections"));
  return p;
}

const std::vector<std::string>& rfc2527_section_names() {
  static const std::vector<std::string> kNames{
      "1 Introduction",
      "2 General Provisions",
      "3 Identification and Authentication",
      "4 Operational Requirements",
      "5 Physical, Procedural, and Personnel Security Controls",
      "6 Technical Security Controls",
      "7 Certificate and CRL Profiles",
      "8 Specification Administration",
  };
  return kNames;
}

CertificatePolicy make_policy(std::string policy_id, std::string title, std::set<Profile> allowed_profiles,
                              int max_validity_days) {
  CertificatePolicy p;
  p.policy_id = std::move(policy_id);
  p.title = std::move(title);
  p.allowed_profiles = std::move(allowed_profiles);
  p.max_validity_days = max_validity_days;
  p.document_text = p.title + " (" + p.policy_id + ")";
  for (const auto& name : rfc2527_section_names()) p.rfc2527_sections[name] = "Not stipulated.";
  p.validate();
  return p;
}

}  // namespace eidpki::ca
