#include "eidpki/enrollment/repository.hpp"

#include "eidpki/core/error.hpp"

namespace eidpki::enrollment {

void Repository::store(const Certificate& cert) {
  const auto key = std::make_pair(cert.fields.issuer_id, cert.fields.serial);
  if (by_serial_.count(key)) {
    throw Error("duplicate-serial",
                "serial " + std::to_string(cert.fields.serial) + " already stored for " + cert.fields.issuer_id);
  }
  bool ok = false;
  if (cert.self_signed()) {
    ok = verify_certificate_signature(cert, cert.fields.public_key, cert.fields.scheme_id);
  } else if (const std::optional<Certificate> issuer = find_ca(cert.fields.issuer_id)) {
    ok = verify_certificate_signature(cert, issuer->fields.public_key, issuer->fields.scheme_id);
  }
  if (!ok) throw Error("invalid-signature", "certificate does not verify under " + cert.fields.issuer_id);

  by_serial_.emplace(key, cert);
  by_subject_[cert.fields.subject_id].emplace(cert.fields.serial, cert.fields.issuer_id);
  if (cert.fields.profile == Profile::ca) ca_by_subject_.insert_or_assign(cert.fields.subject_id, key);
}

std::optional<Certificate> Repository::find(std::string_view issuer_id, std::uint64_t serial) const {
  auto it = by_serial_.find({std::string(issuer_id), serial});
  if (it == by_serial_.end()) return std::nullopt;
  return it->second;
}

std::optional<Certificate> Repository::find_ca(std::string_view subject_id) const {
  auto it = ca_by_subject_.find(subject_id);
  if (it == ca_by_subject_.end()) return std::nullopt;
  return by_serial_.at(it->second);
}

std::vector<Certificate> Repository::fetch_by_subject(std::string_view subject_id) const {
  std::vector<Certificate> out;
  auto it = by_subject_.find(subject_id);
  if (it == by_subject_.end()) return out;
  for (const auto& [serial, issuer] : it->second) out.push_back(by_serial_.at({issuer, serial}));
  return out;
}

}  // namespace eidpki::enrollment
