#include <gtest/gtest.h>

#include <map>
#include <set>

#include "eidpki/core/certificate.hpp"
#include "eidpki/core/error.hpp"
#include "eidpki/core/path.hpp"

namespace eidpki {
namespace {

constexpr UnixTime kNow = 1'750'000'000;

class MapDirectory : public CertificateDirectory {
 public:
  void add(const Certificate& c) {
    if (c.fields.profile == Profile::ca) by_subject_[c.fields.subject_id] = c;
    by_serial_[{c.fields.issuer_id, c.fields.serial}] = c;
  }
  std::optional<Certificate> find_ca(std::string_view subject_id) const override {
    auto it = by_subject_.find(std::string(subject_id));
    if (it == by_subject_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<Certificate> find(std::string_view issuer_id, std::uint64_t serial) const override {
    auto it = by_serial_.find({std::string(issuer_id), serial});
    if (it == by_serial_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::map<std::string, Certificate> by_subject_;
  std::map<std::pair<std::string, std::uint64_t>, Certificate> by_serial_;
};

class SetChecker : public RevocationChecker {
 public:
  std::set<std::pair<std::string, std::uint64_t>> revoked;
  int calls = 0;
  RevocationAnswer check(const Certificate& cert, const IssuerKey&, UnixTime) override {
    ++calls;
    const bool r = revoked.count({cert.fields.issuer_id, cert.fields.serial}) != 0;
    return {r ? RevocationStatus::revoked : RevocationStatus::good, ""};
  }
  RevocationSource source() const override { return RevocationSource::crl; }
};

enum class State { valid, expired, not_yet_valid, revoked, bad_signature };
constexpr State kStates[] = {State::valid, State::expired, State::not_yet_valid, State::revoked, State::bad_signature};

struct Pki {
  Random rng{77};
  KeyPair root_key = generate_key_pair(kEd25519Scheme, kCaKeyLengthBits, rng);
  KeyPair sub_key = generate_key_pair(kEd25519Scheme, kCaKeyLengthBits, rng);
  KeyPair rogue_key = generate_key_pair(kEd25519Scheme, kCaKeyLengthBits, rng);
  Certificate root;
  std::uint64_t next_serial = 1;

  Pki() {
    root = issue(root_key, "root", "root", Profile::ca, root_key.public_key, State::valid);
  }

  Certificate issue(const KeyPair& signer, const std::string& issuer, const std::string& subject, Profile profile,
                    const Bytes& pub, State state) {
    CertificateFields f;
    f.serial = next_serial++;
    f.subject_id = subject;
    f.issuer_id = issuer;
    f.profile = profile;
    f.public_key = pub;
    f.scheme_id = std::string(kEd25519Scheme);
    f.key_length_bits = profile == Profile::ca ? kCaKeyLengthBits : kUserKeyLengthBits;
    f.policy_id = "pol";
    f.not_before = kNow - 100 * kSecondsPerDay;
    f.not_after = kNow + 100 * kSecondsPerDay;
    if (state == State::expired) {
      f.not_before = kNow - 400 * kSecondsPerDay;
      f.not_after = kNow - 1;
    } else if (state == State::not_yet_valid) {
      f.not_before = kNow + 1;
      f.not_after = kNow + 400 * kSecondsPerDay;
    }
    return sign_certificate(state == State::bad_signature ? rogue_key : signer, f);
  }

  TrustAnchorSet anchors() const {
    TrustAnchorSet a;
    a.add(IssuerKey{"root", root_key.public_key, root_key.scheme_id});
    return a;
  }
};

// Independent reference: evaluates each check type over the whole chain in
// the fixed order, using only primitive verification.
Verdict oracle(const std::vector<Certificate>& chain, const TrustAnchorSet& anchors,
               const std::set<std::pair<std::string, std::uint64_t>>& revoked, UnixTime at) {
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const Certificate& c = chain[i];
    Bytes pub;
    std::string scheme;
    if (i + 1 < chain.size()) {
      pub = chain[i + 1].fields.public_key;
      scheme = chain[i + 1].fields.scheme_id;
    } else {
      pub = anchors.find(c.fields.issuer_id)->public_key;
      scheme = anchors.find(c.fields.issuer_id)->scheme_id;
    }
    if (!verify_message(scheme, pub, c.tbs(), c.signature)) return Verdict::bad_signature;
  }
  for (const Certificate& c : chain) {
    if (at < c.fields.not_before) return Verdict::not_yet_valid;
    if (at > c.fields.not_after) return Verdict::expired;
  }
  for (const Certificate& c : chain) {
    if (c.fields.subject_id == c.fields.issuer_id) continue;
    if (revoked.count({c.fields.issuer_id, c.fields.serial})) return Verdict::revoked;
  }
  return Verdict::valid;
}

TEST(PathBuild, DirectLeafHasLengthTwo) {
  Pki pki;
  MapDirectory dir;
  dir.add(pki.root);
  const Certificate leaf = pki.issue(pki.root_key, "root", "alice", Profile::identity_auth, Bytes(32, 1), State::valid);
  const PathBuildResult r = build_certificate_path(leaf, dir, pki.anchors());
  ASSERT_TRUE(r.path);
  ASSERT_EQ(r.path->chain.size(), 2u);
  EXPECT_EQ(r.path->chain[1], pki.root);
}

TEST(PathBuild, SubCaTopologyHasLengthThree) {
  Pki pki;
  MapDirectory dir;
  dir.add(pki.root);
  const Certificate sub = pki.issue(pki.root_key, "root", "sub", Profile::ca, pki.sub_key.public_key, State::valid);
  dir.add(sub);
  const Certificate leaf = pki.issue(pki.sub_key, "sub", "bob", Profile::identity_auth, Bytes(32, 2), State::valid);
  const PathBuildResult r = build_certificate_path(leaf, dir, pki.anchors());
  ASSERT_TRUE(r.path);
  ASSERT_EQ(r.path->chain.size(), 3u);
  for (std::size_t i = 0; i + 1 < r.path->chain.size(); ++i) {
    EXPECT_EQ(r.path->chain[i].fields.issuer_id, r.path->chain[i + 1].fields.subject_id);
  }
}

TEST(PathBuild, OrphanLeafHasNoPath) {
  Pki pki;
  MapDirectory dir;
  dir.add(pki.root);
  const Certificate leaf = pki.issue(pki.sub_key, "ghost-ca", "carol", Profile::identity_auth, Bytes(32, 3), State::valid);
  const PathBuildResult r = build_certificate_path(leaf, dir, pki.anchors());
  EXPECT_FALSE(r.path);
  EXPECT_NE(r.detail.find("missing issuer"), std::string::npos);
}

TEST(PathBuild, CycleDetected) {
  Pki pki;
  MapDirectory dir;
  dir.add(pki.issue(pki.sub_key, "b", "a", Profile::ca, Bytes(32, 4), State::valid));
  dir.add(pki.issue(pki.sub_key, "a", "b", Profile::ca, Bytes(32, 5), State::valid));
  const Certificate leaf = pki.issue(pki.sub_key, "a", "dave", Profile::identity_auth, Bytes(32, 6), State::valid);
  const PathBuildResult r = build_certificate_path(leaf, dir, pki.anchors());
  EXPECT_FALSE(r.path);
  EXPECT_EQ(r.detail, "cycle");
}

TEST(PathBuild, AnchorWithoutCertificateEndsChain) {
  Pki pki;
  MapDirectory dir;  // root certificate not published
  const Certificate leaf = pki.issue(pki.root_key, "root", "erin", Profile::identity_auth, Bytes(32, 7), State::valid);
  const PathBuildResult r = build_certificate_path(leaf, dir, pki.anchors());
  ASSERT_TRUE(r.path);
  EXPECT_EQ(r.path->chain.size(), 1u);
  SetChecker checker;
  EXPECT_EQ(validate_certificate_path(*r.path, pki.anchors(), checker, kNow).verdict, Verdict::valid);
}

TEST(PathValidate, CleanChainValidThenExpiredAfterNotAfter) {
  Pki pki;
  MapDirectory dir;
  dir.add(pki.root);
  const Certificate leaf = pki.issue(pki.root_key, "root", "frank", Profile::identity_auth, Bytes(32, 8), State::valid);
  const CertPath path = *build_certificate_path(leaf, dir, pki.anchors()).path;
  SetChecker checker;
  const ValidationOutcome ok = validate_certificate_path(path, pki.anchors(), checker, kNow);
  EXPECT_EQ(ok.verdict, Verdict::valid);
  EXPECT_EQ(ok.revocation_source, RevocationSource::crl);
  EXPECT_EQ(ok.checked_at, kNow);
  EXPECT_EQ(validate_certificate_path(path, pki.anchors(), checker, leaf.fields.not_after).verdict, Verdict::valid);
  EXPECT_EQ(validate_certificate_path(path, pki.anchors(), checker, leaf.fields.not_after + 1).verdict,
            Verdict::expired);
}

TEST(PathValidate, ExhaustiveStatesMatchOracle) {
  for (bool via_sub : {false, true}) {
    for (State leaf_state : kStates) {
      for (State sub_state : kStates) {
        if (!via_sub && sub_state != State::valid) continue;
        Pki pki;
        MapDirectory dir;
        dir.add(pki.root);
        SetChecker checker;
        std::string issuer = "root";
        const KeyPair* signer = &pki.root_key;
        if (via_sub) {
          const Certificate sub =
              pki.issue(pki.root_key, "root", "sub", Profile::ca, pki.sub_key.public_key, sub_state);
          dir.add(sub);
          if (sub_state == State::revoked) checker.revoked.insert({"root", sub.fields.serial});
          issuer = "sub";
          signer = &pki.sub_key;
        }
        const Certificate leaf = pki.issue(*signer, issuer, "gina", Profile::identity_auth, Bytes(32, 9), leaf_state);
        if (leaf_state == State::revoked) checker.revoked.insert({issuer, leaf.fields.serial});
        const PathBuildResult built = build_certificate_path(leaf, dir, pki.anchors());
        ASSERT_TRUE(built.path);
        const Verdict expected = oracle(built.path->chain, pki.anchors(), checker.revoked, kNow);
        const ValidationOutcome got = validate_certificate_path(*built.path, pki.anchors(), checker, kNow);
        EXPECT_EQ(got.verdict, expected) << "via_sub=" << via_sub << " leaf=" << static_cast<int>(leaf_state)
                                         << " sub=" << static_cast<int>(sub_state);
        if (got.verdict == Verdict::valid) {
          EXPECT_NE(got.revocation_source, RevocationSource::none);
        }
      }
    }
  }
}

TEST(PathValidate, RevokingIntermediateRevokesLeafAndIsMonotone) {
  Pki pki;
  MapDirectory dir;
  dir.add(pki.root);
  const Certificate sub = pki.issue(pki.root_key, "root", "sub", Profile::ca, pki.sub_key.public_key, State::valid);
  dir.add(sub);
  const Certificate leaf = pki.issue(pki.sub_key, "sub", "hana", Profile::identity_auth, Bytes(32, 10), State::valid);
  const CertPath path = *build_certificate_path(leaf, dir, pki.anchors()).path;
  SetChecker checker;
  EXPECT_EQ(validate_certificate_path(path, pki.anchors(), checker, kNow).verdict, Verdict::valid);
  checker.revoked.insert({"root", sub.fields.serial});
  EXPECT_EQ(validate_certificate_path(path, pki.anchors(), checker, kNow).verdict, Verdict::revoked);
  checker.revoked.insert({"sub", leaf.fields.serial});
  EXPECT_EQ(validate_certificate_path(path, pki.anchors(), checker, kNow).verdict, Verdict::revoked);
  EXPECT_EQ(validate_certificate_path(path, pki.anchors(), checker, leaf.fields.not_after + 1).verdict,
            Verdict::expired);
}

TEST(PathValidate, NoRevocationSourceMeansUnknown) {
  struct Silent : RevocationChecker {
    RevocationAnswer check(const Certificate&, const IssuerKey&, UnixTime) override {
      return {RevocationStatus::good, ""};
    }
    RevocationSource source() const override { return RevocationSource::none; }
  } silent;
  Pki pki;
  MapDirectory dir;
  dir.add(pki.root);
  const Certificate leaf = pki.issue(pki.root_key, "root", "ivan", Profile::identity_auth, Bytes(32, 11), State::valid);
  const CertPath path = *build_certificate_path(leaf, dir, pki.anchors()).path;
  EXPECT_EQ(validate_certificate_path(path, pki.anchors(), silent, kNow).verdict, Verdict::unknown);
}

TEST(TrustAnchors, DuplicateIssuerRejected) {
  TrustAnchorSet a;
  a.add(IssuerKey{"root", Bytes(32, 1), "ed25519"});
  try {
    a.add(IssuerKey{"root", Bytes(32, 2), "ed25519"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "anchor-conflict");
  }
}

}  // namespace
}  // namespace eidpki
