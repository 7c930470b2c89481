#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

#include "eidpki/core/certificate.hpp"

namespace eidpki::ca {

// Certificate policy / practice statement record, with RFC 2527 section
// texts stored verbatim.
struct CertificatePolicy {
  std::string policy_id;
  std::string title;
  std::set<Profile> allowed_profiles;
  int max_validity_days = 0;
  std::string document_text;
  std::map<std::string, std::string> rfc2527_sections;

  bool allows(Profile profile) const { return allowed_profiles.count(profile) != 0; }
  // Throws Error("policy-invalid") on an empty profile set or
  // non-positive validity.
  void validate() const;

  Bytes encode() const;
  static CertificatePolicy decode(ByteView encoded);

  friend bool operator==(const CertificatePolicy&, const CertificatePolicy&) = default;
};

// Top-level section headings of an RFC 2527 CP/CPS.
const std::vector<std::string>& rfc2527_section_names();

// A policy whose RFC 2527 sections are filled with placeholder text.
CertificatePolicy make_policy(std::string policy_id, std::string title, std::set<Profile> allowed_profiles,
                              int max_validity_days);

}  // namespace eidpki::ca
