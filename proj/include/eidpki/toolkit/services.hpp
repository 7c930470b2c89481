#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eidpki/ca/hierarchy.hpp"
#include "eidpki/core/path.hpp"
#include "eidpki/revocation/crl.hpp"
#include "eidpki/revocation/ocsp.hpp"
#include "eidpki/revocation/pcl.hpp"
#include "eidpki/revocation/timestamp.hpp"

namespace eidpki::toolkit {

struct TranscriptStep {
  std::string step;
  bool passed = false;
  std::string detail;

  friend bool operator==(const TranscriptStep&, const TranscriptStep&) = default;
};

// What a relying party sends for outsourced signature validation.
struct SignatureCheckRequest {
  Bytes document_hash;
  Bytes signature;
  std::string signer_issuer_id;
  std::uint64_t signer_serial = 0;
};

struct SignatureVerification {
  ValidationOutcome outcome;
  std::vector<TranscriptStep> transcript;
};

// The three verification steps: signature over the hash, path build, path
// validation. Stops at the first failing step.
SignatureVerification verify_signed_hash(const SignatureCheckRequest& request, const CertificateDirectory& directory,
                                         const TrustAnchorSet& anchors, RevocationChecker& revocation, UnixTime at);

// Online services of the central authority. Implementations throw
// Error("validation-unavailable") when the service cannot be reached.
class ValidationServices {
 public:
  virtual ~ValidationServices() = default;
  virtual revocation::OcspResponse ocsp_check(const revocation::OcspRequest& request) = 0;
  virtual revocation::Crl crl_fetch(std::string_view ca_id) = 0;
  virtual revocation::Pcl pcl_fetch(std::string_view ca_id) = 0;
  virtual SignatureVerification validate_signature(const SignatureCheckRequest& request) = 0;
  virtual std::optional<Certificate> repo_fetch(std::string_view issuer_id, std::uint64_t serial) = 0;
  virtual revocation::TimestampToken tsa_stamp(ByteView document_hash) = 0;
};

struct ServiceCounters {
  std::uint64_t ocsp = 0;
  std::uint64_t crl = 0;
  std::uint64_t pcl = 0;
  std::uint64_t validate = 0;
  std::uint64_t repo = 0;
  std::uint64_t tsa = 0;

  std::uint64_t total() const { return ocsp + crl + pcl + validate + repo + tsa; }
  friend bool operator==(const ServiceCounters&, const ServiceCounters&) = default;
};

// Pass-through that counts every call reaching the backend.
class CountingServices : public ValidationServices {
 public:
  explicit CountingServices(ValidationServices& backend) : backend_(backend) {}

  revocation::OcspResponse ocsp_check(const revocation::OcspRequest& request) override;
  revocation::Crl crl_fetch(std::string_view ca_id) override;
  revocation::Pcl pcl_fetch(std::string_view ca_id) override;
  SignatureVerification validate_signature(const SignatureCheckRequest& request) override;
  std::optional<Certificate> repo_fetch(std::string_view issuer_id, std::uint64_t serial) override;
  revocation::TimestampToken tsa_stamp(ByteView document_hash) override;

  const ServiceCounters& counters() const { return counters_; }
  void reset() { counters_ = {}; }

 private:
  ValidationServices& backend_;
  ServiceCounters counters_;
};

// Certificates of a hierarchy plus those issued by registered Option-1
// operators, which keep their issuance state off the hierarchy.
class IssuerRegistry : public CertificateDirectory {
 public:
  explicit IssuerRegistry(const ca::Hierarchy& hierarchy) : hierarchy_(&hierarchy) {}

  void add_external(const ca::ExternalCaOperator& op);

  struct Issuer {
    const revocation::RevocationState* ledger = nullptr;
    const revocation::IssuedIndex* issued = nullptr;
    const KeyPair* key = nullptr;
  };
  // Throws Error("unknown-issuer") for CAs neither local nor registered, and
  // Error("no-local-key") for external CAs nobody registered.
  Issuer issuer(std::string_view ca_id) const;
  std::vector<std::string> ca_ids() const;

  const ca::Hierarchy& hierarchy() const { return *hierarchy_; }
  TrustAnchorSet anchors() const { return hierarchy_->anchors(); }

  std::optional<Certificate> find_ca(std::string_view subject_id) const override;
  std::optional<Certificate> find(std::string_view issuer_id, std::uint64_t serial) const override;

 private:
  const ca::Hierarchy* hierarchy_;
  std::map<std::string, const ca::ExternalCaOperator*, std::less<>> externals_;
};

// Revocation answers read straight from the issuers' ledgers; what the
// central validation service uses internally.
class LedgerChecker : public RevocationChecker {
 public:
  explicit LedgerChecker(const IssuerRegistry& registry) : registry_(registry) {}
  RevocationAnswer check(const Certificate& cert, const IssuerKey& issuer, UnixTime at) override;
  RevocationSource source() const override { return RevocationSource::ocsp; }

 private:
  const IssuerRegistry& registry_;
};

// In-process central services over an issuer registry. Not synchronized;
// the server serializes access.
class LocalServices : public ValidationServices {
 public:
  LocalServices(const IssuerRegistry& registry, Clock clock, UnixTime crl_window = kSecondsPerDay);

  void set_tsa(revocation::TimestampAuthority* tsa) { tsa_ = tsa; }
  // A stopped service answers every call with validation-unavailable.
  void set_reachable(bool reachable) { reachable_ = reachable; }
  bool reachable() const { return reachable_; }

  revocation::OcspResponse ocsp_check(const revocation::OcspRequest& request) override;
  revocation::Crl crl_fetch(std::string_view ca_id) override;
  revocation::Pcl pcl_fetch(std::string_view ca_id) override;
  SignatureVerification validate_signature(const SignatureCheckRequest& request) override;
  std::optional<Certificate> repo_fetch(std::string_view issuer_id, std::uint64_t serial) override;
  revocation::TimestampToken tsa_stamp(ByteView document_hash) override;

 private:
  void require_reachable() const;

  const IssuerRegistry& registry_;
  Clock clock_;
  UnixTime crl_window_;
  revocation::TimestampAuthority* tsa_ = nullptr;
  bool reachable_ = true;
  std::map<std::string, revocation::PclCache, std::less<>> pcl_cache_;
};

}  // namespace eidpki::toolkit
