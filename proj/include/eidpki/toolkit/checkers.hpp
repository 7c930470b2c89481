#pragma once

#include <map>
#include <string>
#include <string_view>

#include "eidpki/core/crypto.hpp"
#include "eidpki/core/path.hpp"
#include "eidpki/revocation/crl.hpp"
#include "eidpki/revocation/pcl.hpp"
#include "eidpki/toolkit/services.hpp"

namespace eidpki::toolkit {

// CRLs the relying party downloaded ahead of time, one per CA.
class CrlStore {
 public:
  void put(revocation::Crl crl);
  const revocation::Crl* find(std::string_view ca_id) const;
  bool empty() const { return crls_.empty(); }
  const std::map<std::string, revocation::Crl, std::less<>>& all() const { return crls_; }

 private:
  std::map<std::string, revocation::Crl, std::less<>> crls_;
};

// Offline checking against locally held CRLs. Throws crl-stale / crl-invalid
// from the CRL itself, validation-unavailable when no CRL covers the issuer.
class CrlChecker : public RevocationChecker {
 public:
  explicit CrlChecker(const CrlStore& store) : store_(store) {}
  RevocationAnswer check(const Certificate& cert, const IssuerKey& issuer, UnixTime at) override;
  RevocationSource source() const override { return RevocationSource::crl; }

 private:
  const CrlStore& store_;
};

// One signed, nonce-bound OCSP round trip per certificate.
class OcspChecker : public RevocationChecker {
 public:
  OcspChecker(ValidationServices& services, Random& rng) : services_(services), rng_(rng) {}
  RevocationAnswer check(const Certificate& cert, const IssuerKey& issuer, UnixTime at) override;
  RevocationSource source() const override { return RevocationSource::ocsp; }

 private:
  ValidationServices& services_;
  Random& rng_;
};

// Positive lists: a signed PCL naming the serial means good. Anything
// within its validity window and absent from the list counts as revoked.
class PclChecker : public RevocationChecker {
 public:
  void put(revocation::Pcl pcl);
  RevocationAnswer check(const Certificate& cert, const IssuerKey& issuer, UnixTime at) override;
  RevocationSource source() const override { return RevocationSource::pcl; }

 private:
  std::map<std::string, revocation::Pcl, std::less<>> pcls_;
};

}  // namespace eidpki::toolkit
