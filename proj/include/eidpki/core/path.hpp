#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eidpki/core/certificate.hpp"

namespace eidpki {

// Public verification material of an issuer: a trust anchor, or the key
// taken from the next certificate up a chain.
struct IssuerKey {
  std::string issuer_id;
  Bytes public_key;
  std::string scheme_id;
};

using TrustAnchor = IssuerKey;

class TrustAnchorSet {
 public:
  TrustAnchorSet() = default;
  explicit TrustAnchorSet(std::vector<TrustAnchor> anchors);

  // Throws Error("anchor-conflict") when the issuer id is already present.
  void add(TrustAnchor anchor);
  const TrustAnchor* find(std::string_view issuer_id) const;
  bool empty() const { return anchors_.empty(); }
  const std::vector<TrustAnchor>& anchors() const { return anchors_; }

 private:
  std::vector<TrustAnchor> anchors_;
};

// Source of certificates for path building and signature verification.
class CertificateDirectory {
 public:
  virtual ~CertificateDirectory() = default;
  // The CA certificate whose subject is subject_id, if any.
  virtual std::optional<Certificate> find_ca(std::string_view subject_id) const = 0;
  virtual std::optional<Certificate> find(std::string_view issuer_id, std::uint64_t serial) const = 0;
};

// Leaf first; the last element is issued by a trust anchor.
struct CertPath {
  std::vector<Certificate> chain;
};

enum class Verdict { valid, expired, not_yet_valid, revoked, unknown, bad_signature, no_path };
enum class RevocationSource { crl, pcl, ocsp, none };

std::string_view to_string(Verdict verdict);
std::string_view to_string(RevocationSource source);
Verdict verdict_from_string(std::string_view name);

struct ValidationOutcome {
  Verdict verdict = Verdict::no_path;
  UnixTime checked_at = 0;
  RevocationSource revocation_source = RevocationSource::none;
  std::string detail;
};

struct PathBuildResult {
  std::optional<CertPath> path;
  std::string detail;  // why no path was found ("cycle", "missing issuer ...")
};

// Shortest chain from leaf to an anchor. Stops at a self-signed anchor
// certificate, or at the last certificate issued by an anchor whose own
// certificate is not in the directory.
PathBuildResult build_certificate_path(const Certificate& leaf, const CertificateDirectory& directory,
                                       const TrustAnchorSet& anchors);

enum class RevocationStatus { good, revoked, unknown };
std::string_view to_string(RevocationStatus status);

struct RevocationAnswer {
  RevocationStatus status = RevocationStatus::unknown;
  std::string detail;
};

// Status oracle consulted for every non-anchor element of a path.
class RevocationChecker {
 public:
  virtual ~RevocationChecker() = default;
  virtual RevocationAnswer check(const Certificate& cert, const IssuerKey& issuer, UnixTime at) = 0;
  virtual RevocationSource source() const = 0;
};

// Checks run in three passes, each leaf to anchor: signatures, then validity
// windows, then revocation. The first failure decides the verdict.
ValidationOutcome validate_certificate_path(const CertPath& path, const TrustAnchorSet& anchors,
                                            RevocationChecker& revocation, UnixTime at);

// Signature-only walk of a path to its anchor; used where no revocation
// service may be consulted.
bool verify_path_signatures(const CertPath& path, const TrustAnchorSet& anchors);

}  // namespace eidpki
