#include "eidpki/toolkit/services.hpp"

#include "eidpki/core/error.hpp"
#include "eidpki/core/signature_scheme.hpp"

namespace eidpki::toolkit {

SignatureVerification verify_signed_hash(const SignatureCheckRequest& request, const CertificateDirectory& directory,
                                         const TrustAnchorSet& anchors, RevocationChecker& revocation, UnixTime at) {
  SignatureVerification result;
  result.outcome.checked_at = at;
  auto stop = [&](Verdict verdict, std::string step, std::string detail) {
    result.outcome.verdict = verdict;
    result.outcome.detail = detail;
    result.transcript.push_back({std::move(step), false, std::move(detail)});
    return result;
  };

  const std::optional<Certificate> signer = directory.find(request.signer_issuer_id, request.signer_serial);
  if (!signer) {
    return stop(Verdict::no_path, "signature",
                "signer certificate " + request.signer_issuer_id + "/" + std::to_string(request.signer_serial) +
                    " not found");
  }
  bool signature_ok = false;
  try {
    signature_ok = request.document_hash.size() == kHashSize &&
                   verify_message(signer->fields.scheme_id, signer->fields.public_key, request.document_hash,
                                  request.signature);
  } catch (const Error&) {
    signature_ok = false;
  }
  if (!signature_ok) return stop(Verdict::bad_signature, "signature", "document signature does not verify");
  result.transcript.push_back({"signature", true, ""});

  const PathBuildResult built = build_certificate_path(*signer, directory, anchors);
  if (!built.path) return stop(Verdict::no_path, "path-build", built.detail);
  result.transcript.push_back({"path-build", true, "length " + std::to_string(built.path->chain.size())});

  result.outcome = validate_certificate_path(*built.path, anchors, revocation, at);
  result.transcript.push_back({"path-validate", result.outcome.verdict == Verdict::valid,
                               std::string(to_string(result.outcome.verdict))});
  return result;
}

revocation::OcspResponse CountingServices::ocsp_check(const revocation::OcspRequest& request) {
  ++counters_.ocsp;
  return backend_.ocsp_check(request);
}

revocation::Crl CountingServices::crl_fetch(std::string_view ca_id) {
  ++counters_.crl;
  return backend_.crl_fetch(ca_id);
}

revocation::Pcl CountingServices::pcl_fetch(std::string_view ca_id) {
  ++counters_.pcl;
  return backend_.pcl_fetch(ca_id);
}

SignatureVerification CountingServices::validate_signature(const SignatureCheckRequest& request) {
  ++counters_.validate;
  return backend_.validate_signature(request);
}

std::optional<Certificate> CountingServices::repo_fetch(std::string_view issuer_id, std::uint64_t serial) {
  ++counters_.repo;
  return backend_.repo_fetch(issuer_id, serial);
}

revocation::TimestampToken CountingServices::tsa_stamp(ByteView document_hash) {
  ++counters_.tsa;
  return backend_.tsa_stamp(document_hash);
}

void IssuerRegistry::add_external(const ca::ExternalCaOperator& op) { externals_[op.ca_id()] = &op; }

IssuerRegistry::Issuer IssuerRegistry::issuer(std::string_view ca_id) const {
  if (auto it = externals_.find(ca_id); it != externals_.end()) {
    const ca::ExternalCaOperator& op = *it->second;
    return Issuer{&op.state().ledger, &op.state().issued, &op.key()};
  }
  const ca::CertificationAuthority* authority = hierarchy_->find_authority(ca_id);
  if (!authority) throw Error("unknown-issuer", "no CA " + std::string(ca_id));
  const ca::IssuerState& state = hierarchy_->issuer_state(ca_id);
  return Issuer{&state.ledger, &state.issued, &hierarchy_->signing_key(ca_id)};
}

std::vector<std::string> IssuerRegistry::ca_ids() const { return hierarchy_->ca_ids(); }

std::optional<Certificate> IssuerRegistry::find_ca(std::string_view subject_id) const {
  return hierarchy_->find_ca(subject_id);
}

std::optional<Certificate> IssuerRegistry::find(std::string_view issuer_id, std::uint64_t serial) const {
  if (auto it = externals_.find(issuer_id); it != externals_.end()) {
    const auto& issued = it->second->state().issued;
    auto found = issued.find(serial);
    if (found == issued.end()) return std::nullopt;
    return found->second;
  }
  return hierarchy_->find(issuer_id, serial);
}

RevocationAnswer LedgerChecker::check(const Certificate& cert, const IssuerKey&, UnixTime at) {
  const IssuerRegistry::Issuer issuer = registry_.issuer(cert.fields.issuer_id);
  switch (revocation::classify(cert.fields.serial, *issuer.ledger, *issuer.issued, at)) {
    case revocation::SerialState::valid:
      return {RevocationStatus::good, ""};
    case revocation::SerialState::revoked:
      return {RevocationStatus::revoked, "ledger"};
    default:
      return {RevocationStatus::unknown, "not current"};
  }
}

LocalServices::LocalServices(const IssuerRegistry& registry, Clock clock, UnixTime crl_window)
    : registry_(registry), clock_(std::move(clock)), crl_window_(crl_window) {}

void LocalServices::require_reachable() const {
  if (!reachable_) throw Error("validation-unavailable", "central services are not reachable");
}

revocation::OcspResponse LocalServices::ocsp_check(const revocation::OcspRequest& request) {
  require_reachable();
  const IssuerRegistry::Issuer issuer = registry_.issuer(request.ca_id);
  return revocation::ocsp_respond(request, *issuer.ledger, *issuer.issued, *issuer.key, clock_());
}

revocation::Crl LocalServices::crl_fetch(std::string_view ca_id) {
  require_reachable();
  const IssuerRegistry::Issuer issuer = registry_.issuer(ca_id);
  return revocation::generate_crl(*issuer.ledger, *issuer.issued, *issuer.key, clock_(), crl_window_);
}

revocation::Pcl LocalServices::pcl_fetch(std::string_view ca_id) {
  require_reachable();
  const IssuerRegistry::Issuer issuer = registry_.issuer(ca_id);
  return pcl_cache_[std::string(ca_id)].get(*issuer.ledger, *issuer.issued, *issuer.key, clock_());
}

SignatureVerification LocalServices::validate_signature(const SignatureCheckRequest& request) {
  require_reachable();
  LedgerChecker checker(registry_);
  return verify_signed_hash(request, registry_, registry_.anchors(), checker, clock_());
}

std::optional<Certificate> LocalServices::repo_fetch(std::string_view issuer_id, std::uint64_t serial) {
  require_reachable();
  return registry_.find(issuer_id, serial);
}

revocation::TimestampToken LocalServices::tsa_stamp(ByteView document_hash) {
  require_reachable();
  if (!tsa_) throw Error("validation-unavailable", "no time-stamping authority configured");
  return tsa_->issue(document_hash, clock_());
}

}  // namespace eidpki::toolkit
