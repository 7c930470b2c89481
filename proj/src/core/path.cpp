#include "eidpki/core/path.hpp"

#include <array>
#include <set>

#include "eidpki/core/error.hpp"

namespace eidpki {

TrustAnchorSet::TrustAnchorSet(std::vector<TrustAnchor> anchors) {
  for (auto& a : anchors) add(std::move(a));
}

void TrustAnchorSet::add(TrustAnchor anchor) {
  if (find(anchor.issuer_id) != nullptr) throw Error("anchor-conflict", anchor.issuer_id);
  anchors_.push_back(std::move(anchor));
}

const TrustAnchor* TrustAnchorSet::find(std::string_view issuer_id) const {
  for (const auto& a : anchors_) {
    if (a.issuer_id == issuer_id) return &a;
  }
  return nullptr;
}

namespace {

constexpr std::array<std::pair<Verdict, std::string_view>, 7> kVerdictNames{{
    {Verdict::valid, "valid"},
    {Verdict::expired, "expired"},
    {Verdict::not_yet_valid, "not_yet_valid"},
    {Verdict::revoked, "revoked"},
    {Verdict::unknown, "unknown"},
    {Verdict::bad_signature, "bad_signature"},
    {Verdict::no_path, "no_path"},
}};

}  // namespace

std::string_view to_string(Verdict verdict) {
  for (const auto& [v, name] : kVerdictNames) {
    if (v == verdict) return name;
  }
  return "unknown";
}

Verdict verdict_from_string(std::string_view name) {
  for (const auto& [v, n] : kVerdictNames) {
    if (n == name) return v;
  }
  throw Error("decode-error", "unknown verdict " + std::string(name));
}

std::string_view to_string(RevocationSource source) {
  switch (source) {
    case RevocationSource::crl: return "crl";
    case RevocationSource::pcl: return "pcl";
    case RevocationSource::ocsp: return "ocsp";
    case RevocationSource::none: return "none";
  }
  return "none";
}

std::string_view to_string(RevocationStatus status) {
  switch (status) {
    case RevocationStatus::good: return "good";
    case RevocationStatus::revoked: return "revoked";
    case RevocationStatus::unknown: return "unknown";
  }
  return "unknown";
}

PathBuildResult build_certificate_path(const Certificate& leaf, const CertificateDirectory& directory,
                                       const TrustAnchorSet& anchors) {
  CertPath path;
  std::set<std::string> visited;
  Certificate current = leaf;
  for (;;) {
    const std::string key = current.fields.issuer_id + "/" + current.fields.subject_id;
    if (!visited.insert(key).second) return {std::nullopt, "cycle"};
    path.chain.push_back(current);

    const bool issuer_is_anchor = anchors.find(current.fields.issuer_id) != nullptr;
    if (current.self_signed()) {
      if (issuer_is_anchor) return {std::move(path), {}};
      return {std::nullopt, "self-signed certificate " + current.fields.subject_id + " is not a trust anchor"};
    }
    auto issuer = directory.find_ca(current.fields.issuer_id);
    if (!issuer) {
      if (issuer_is_anchor) return {std::move(path), {}};
      return {std::nullopt, "missing issuer " + current.fields.issuer_id};
    }
    current = std::move(*issuer);
  }
}

namespace {

IssuerKey issuer_of(const CertPath& path, std::size_t index, const TrustAnchorSet& anchors, bool& found) {
  found = true;
  if (index + 1 < path.chain.size()) {
    const auto& up = path.chain[index + 1].fields;
    return IssuerKey{up.subject_id, up.public_key, up.scheme_id};
  }
  const TrustAnchor* anchor = anchors.find(path.chain[index].fields.issuer_id);
  if (anchor == nullptr) {
    found = false;
    return {};
  }
  return *anchor;
}

bool is_anchor_certificate(const Certificate& cert, const TrustAnchorSet& anchors) {
  return cert.self_signed() && anchors.find(cert.fields.subject_id) != nullptr;
}

}  // namespace

ValidationOutcome validate_certificate_path(const CertPath& path, const TrustAnchorSet& anchors,
                                            RevocationChecker& revocation, UnixTime at) {
  ValidationOutcome out;
  out.checked_at = at;
  out.revocation_source = revocation.source();
  if (path.chain.empty()) {
    out.verdict = Verdict::no_path;
    out.detail = "empty path";
    return out;
  }

  std::vector<IssuerKey> issuers;
  for (std::size_t i = 0; i < path.chain.size(); ++i) {
    bool found = false;
    IssuerKey k = issuer_of(path, i, anchors, found);
    if (!found || k.issuer_id != path.chain[i].fields.issuer_id) {
      out.verdict = Verdict::no_path;
      out.detail = "broken chain at " + path.chain[i].fields.subject_id;
      return out;
    }
    issuers.push_back(std::move(k));
  }

  for (std::size_t i = 0; i < path.chain.size(); ++i) {
    if (!verify_certificate_signature(path.chain[i], issuers[i].public_key, issuers[i].scheme_id)) {
      out.verdict = Verdict::bad_signature;
      out.detail = "signature of " + path.chain[i].fields.subject_id;
      return out;
    }
  }
  for (const auto& cert : path.chain) {
    if (at < cert.fields.not_before) {
      out.verdict = Verdict::not_yet_valid;
      out.detail = cert.fields.subject_id + " not yet valid";
      return out;
    }
    if (at > cert.fields.not_after) {
      out.verdict = Verdict::expired;
      out.detail = cert.fields.subject_id + " expired";
      return out;
    }
  }
  for (std::size_t i = 0; i < path.chain.size(); ++i) {
    const Certificate& cert = path.chain[i];
    if (is_anchor_certificate(cert, anchors)) continue;
    RevocationAnswer answer = revocation.check(cert, issuers[i], at);
    if (answer.status == RevocationStatus::revoked) {
      out.verdict = Verdict::revoked;
      out.detail = cert.fields.subject_id + " revoked";
      return out;
    }
    if (answer.status == RevocationStatus::unknown) {
      out.verdict = Verdict::unknown;
      out.detail = cert.fields.subject_id + " status unknown" + (answer.detail.empty() ? "" : ": " + answer.detail);
      return out;
    }
  }
  out.verdict = out.revocation_source == RevocationSource::none ? Verdict::unknown : Verdict::valid;
  if (out.verdict == Verdict::unknown) out.detail = "no revocation source";
  return out;
}

bool verify_path_signatures(const CertPath& path, const TrustAnchorSet& anchors) {
  if (path.chain.empty()) return false;
  for (std::size_t i = 0; i < path.chain.size(); ++i) {
    bool found = false;
    IssuerKey k = issuer_of(path, i, anchors, found);
    if (!found || k.issuer_id != path.chain[i].fields.issuer_id) return false;
    if (!verify_certificate_signature(path.chain[i], k.public_key, k.scheme_id)) return false;
  }
  return true;
}

}  // namespace eidpki
