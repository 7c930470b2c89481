#include "eidpki/toolkit/checkers.hpp"

#include "eidpki/core/error.hpp"

namespace eidpki::toolkit {

void CrlStore::put(revocation::Crl crl) {
  std::string id = crl.ca_id;
  crls_.insert_or_assign(std::move(id), std::move(crl));
}

const revocation::Crl* CrlStore::find(std::string_view ca_id) const {
  auto it = crls_.find(ca_id);
  return it == crls_.end() ? nullptr : &it->second;
}

RevocationAnswer CrlChecker::check(const Certificate& cert, const IssuerKey& issuer, UnixTime at) {
  const revocation::Crl* crl = store_.find(cert.fields.issuer_id);
  if (!crl) throw Error("validation-unavailable", "no CRL held for " + cert.fields.issuer_id);
  const RevocationStatus status = revocation::check_status_via_crl(cert.fields.serial, *crl, &cert, issuer, at);
  return {status, "crl " + std::to_string(crl->this_update)};
}

RevocationAnswer OcspChecker::check(const Certificate& cert, const IssuerKey& issuer, UnixTime) {
  const auto request = revocation::OcspRequest::make(cert.fields.issuer_id, cert.fields.serial, rng_);
  const auto response = services_.ocsp_check(request);
  return {revocation::accept_ocsp_response(request, response, issuer), "ocsp"};
}

void PclChecker::put(revocation::Pcl pcl) {
  std::string id = pcl.ca_id;
  pcls_.insert_or_assign(std::move(id), std::move(pcl));
}

RevocationAnswer PclChecker::check(const Certificate& cert, const IssuerKey& issuer, UnixTime at) {
  auto it = pcls_.find(cert.fields.issuer_id);
  if (it == pcls_.end()) throw Error("validation-unavailable", "no PCL held for " + cert.fields.issuer_id);
  const revocation::Pcl& pcl = it->second;
  if (!pcl.verify(issuer)) throw Error("pcl-invalid", "PCL signature does not verify for " + issuer.issuer_id);
  if (pcl.contains(cert.fields.serial)) return {RevocationStatus::good, "pcl"};
  if (!cert.valid_at(at) || !cert.valid_at(pcl.as_of)) return {RevocationStatus::unknown, "pcl"};
  return {RevocationStatus::revoked, "absent from pcl"};
}

}  // namespace eidpki::toolkit
