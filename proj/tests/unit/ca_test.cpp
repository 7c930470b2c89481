#include <gtest/gtest.h>

#include <set>

#include "eidpki/ca/hierarchy.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki::ca {
namespace {

using revocation::RevocationReason;

constexpr UnixTime kStart = 1'750'000'000;

std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "no-error";
}

const std::set<Profile> kAllLeaf{Profile::identity_auth, Profile::signature, Profile::encryption, Profile::attribute,
                                 Profile::device};

struct World {
  Random rng{2024};
  ManualClock clock{kStart};
  Hierarchy h{rng, clock.clock()};

  World() {
    CaConfig root;
    root.ca_id = "root";
    root.policy = make_policy("pol-root", "Root CA policy", {Profile::ca, Profile::device}, 7300);
    h.init_root_ca(root);
  }

  const CertificationAuthority& population(std::set<Profile> profiles = {}) {
    if (profiles.empty()) {
      profiles = kAllLeaf;
      profiles.insert(Profile::ca);
    }
    CaConfig pop;
    pop.ca_id = "pop";
    pop.policy = make_policy("pol-pop", "Population CA policy", profiles, 3650);
    return h.init_population_ca("root", pop);
  }

  std::optional<CertPath> path(const Certificate& leaf) { return build_certificate_path(leaf, h, h.anchors()).path; }
};

// Revocation answers straight from the hierarchy's ledgers.
class LedgerChecker : public RevocationChecker {
 public:
  explicit LedgerChecker(const Hierarchy& h, std::map<std::string, const IssuerState*> extra = {})
      : h_(h), extra_(std::move(extra)) {}
  RevocationAnswer check(const Certificate& cert, const IssuerKey&, UnixTime at) override {
    const std::string& issuer = cert.fields.issuer_id;
    const IssuerState& s = extra_.count(issuer) ? *extra_.at(issuer) : h_.issuer_state(issuer);
    switch (revocation::classify(cert.fields.serial, s.ledger, s.issued, at)) {
      case revocation::SerialState::valid: return {RevocationStatus::good, ""};
      case revocation::SerialState::revoked: return {RevocationStatus::revoked, ""};
      default: return {RevocationStatus::unknown, ""};
    }
  }
  RevocationSource source() const override { return RevocationSource::crl; }

 private:
  const Hierarchy& h_;
  std::map<std::string, const IssuerState*> extra_;
};

IssueRequest auth_request(Random& rng, const std::string& subject) {
  IssueRequest r;
  r.subject_id = subject;
  r.profile = Profile::identity_auth;
  r.public_key = generate_key_pair(kEd25519Scheme, kUserKeyLengthBits, rng).public_key;
  return r;
}

TEST(Root, InitCreatesSelfSignedAnchorWith2048Metadata) {
  World w;
  const CertificationAuthority* root = w.h.root();
  ASSERT_NE(root, nullptr);
  EXPECT_EQ(root->kind, CaKind::root);
  EXPECT_FALSE(root->parent_ca_id);
  EXPECT_TRUE(root->ca_certificate.self_signed());
  EXPECT_TRUE(verify_certificate_signature(root->ca_certificate, root->ca_certificate.fields.public_key,
                                           root->ca_certificate.fields.scheme_id));
  EXPECT_EQ(root->ca_certificate.fields.key_length_bits, 2048u);
  EXPECT_EQ(w.h.anchors().anchors().size(), 1u);
  CaConfig again;
  again.ca_id = "root2";
  again.policy = make_policy("pol-x", "x", {Profile::ca}, 10);
  EXPECT_EQ(error_code([&] { w.h.init_root_ca(again); }), "root-exists");
}

TEST(Population, ChainsToRootInSeparateContainer) {
  World w;
  const CertificationAuthority& pop = w.population();
  auto p = w.path(pop.ca_certificate);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->chain.size(), 2u);
  EXPECT_NE(pop.key_container_id, w.h.root()->key_container_id);
  EXPECT_EQ(pop.parent_ca_id, "root");
}

TEST(Population, SuspendedRootRefuses) {
  World w;
  w.h.set_status("root", CaStatus::suspended);
  EXPECT_EQ(error_code([&] { w.population(); }), "ca-suspended");
  EXPECT_EQ(w.h.key_store().containers().size(), 1u);
}

TEST(Population, PolicyWithoutCaProfileBlocksSubCa) {
  World w;
  w.population(kAllLeaf);
  CaConfig sub;
  sub.ca_id = "vsub";
  sub.policy = make_policy("pol-vsub", "v", {Profile::identity_auth}, 1000);
  EXPECT_EQ(error_code([&] { w.h.provision_virtual_sub_ca("pop", sub); }), "policy-violation");
  EXPECT_EQ(w.h.find_authority("vsub"), nullptr);
  EXPECT_EQ(w.h.key_store().containers().size(), 2u);
}

TEST(ExternalSubCa, CertifiedWithoutLocalKeysAndLeafChainsThree) {
  World w;
  w.h.add_policy(make_policy("pol-egov", "E-government", {Profile::ca, Profile::identity_auth}, 1825));
  ExternalCaOperator egov("egov-ca", std::string(kEd25519Scheme), w.rng, w.clock.clock());
  const std::size_t keys_before = w.h.key_store().key_pair_count();
  const Certificate cert = w.h.certify_external_sub_ca("root", egov.certification_request("pol-egov"));
  EXPECT_EQ(w.h.key_store().key_pair_count(), keys_before);
  EXPECT_FALSE(w.h.ca("egov-ca").holds_local_keys());
  EXPECT_EQ(w.h.ca("egov-ca").kind, CaKind::subordinate_external);
  egov.install_certificate(cert, w.h.policy("pol-egov"));
  EXPECT_EQ(error_code([&] { w.h.issue_end_entity("egov-ca", auth_request(w.rng, "x")); }), "no-local-key");

  const Issuance leaf = egov.issue(auth_request(w.rng, "citizen-1"));
  auto p = w.path(leaf.certificate);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->chain.size(), 3u);
  LedgerChecker checker(w.h, {{"egov-ca", &egov.state()}});
  EXPECT_EQ(validate_certificate_path(*p, w.h.anchors(), checker, kStart).verdict, Verdict::valid);
}

TEST(ExternalSubCa, PolicyWithoutCaProfileRejected) {
  World w;
  w.h.add_policy(make_policy("pol-auth-only", "x", {Profile::identity_auth}, 100));
  ExternalCaOperator op("bank-ca", std::string(kEd25519Scheme), w.rng, w.clock.clock());
  EXPECT_EQ(error_code([&] { w.h.certify_external_sub_ca("root", op.certification_request("pol-auth-only")); }),
            "policy-violation");
}

TEST(VirtualSubCa, FreshContainerOnSameHostAndLeafValidates) {
  World w;
  const CertificationAuthority& pop = w.population();
  CaConfig cfg;
  cfg.ca_id = "health-ca";
  cfg.policy = make_policy("pol-health", "Health", {Profile::identity_auth, Profile::attribute}, 730);
  const CertificationAuthority& sub = w.h.provision_virtual_sub_ca("pop", cfg);
  const KeyContainer& sub_c = w.h.key_store().at(sub.key_container_id);
  const KeyContainer& pop_c = w.h.key_store().at(pop.key_container_id);
  EXPECT_NE(sub_c.container_id, pop_c.container_id);
  EXPECT_EQ(sub_c.host_id, pop_c.host_id);
  EXPECT_EQ(sub_c.keys.size(), 1u);
  EXPECT_EQ(sub.ca_certificate.fields.issuer_id, "pop");
  EXPECT_EQ(sub.kind, CaKind::subordinate_virtual);

  const Issuance leaf = w.h.issue_end_entity("health-ca", auth_request(w.rng, "doctor-1"));
  auto p = w.path(leaf.certificate);
  ASSERT_TRUE(p);
  ASSERT_EQ(p->chain.size(), 4u);  // leaf, health-ca, pop, root
  EXPECT_EQ(p->chain.back().fields.subject_id, "root");
  LedgerChecker checker(w.h);
  EXPECT_EQ(validate_certificate_path(*p, w.h.anchors(), checker, kStart).verdict, Verdict::valid);

  EXPECT_EQ(error_code([&] { w.h.provision_virtual_sub_ca("pop", cfg); }), "id-conflict");
}

TEST(Hierarchy, TreeDepthAndKeySeparation) {
  World w;
  w.population();
  CaConfig cfg;
  cfg.ca_id = "v1";
  cfg.policy = make_policy("pol-v1", "v1", {Profile::identity_auth}, 100);
  w.h.provision_virtual_sub_ca("pop", cfg);
  w.h.add_policy(make_policy("pol-ext", "ext", {Profile::ca}, 1825));
  ExternalCaOperator ext("ext", std::string(kEd25519Scheme), w.rng, w.clock.clock());
  w.h.certify_external_sub_ca("root", ext.certification_request("pol-ext"));

  std::set<std::string> containers;
  for (const std::string& id : w.h.ca_ids()) {
    const CertificationAuthority& ca = w.h.ca(id);
    int steps = 0;
    const CertificationAuthority* cur = &ca;
    while (cur->parent_ca_id) {
      cur = &w.h.ca(*cur->parent_ca_id);
      ASSERT_LE(++steps, 3);
    }
    EXPECT_EQ(cur->kind, CaKind::root);
    EXPECT_EQ(ca.kind == CaKind::root, ca.ca_certificate.self_signed());
    if (ca.holds_local_keys()) {
      EXPECT_TRUE(containers.insert(ca.key_container_id).second);
    }
  }
  EXPECT_EQ(containers.size(), w.h.key_store().containers().size());
}

TEST(Issuance, UserKeysCarry4096AndAttributesRoundTrip) {
  World w;
  w.population();
  const Issuance auth = w.h.issue_end_entity("pop", auth_request(w.rng, "alice"));
  EXPECT_EQ(auth.certificate.fields.key_length_bits, 4096u);
  EXPECT_FALSE(auth.escrow);

  IssueRequest attr = auth_request(w.rng, "alice");
  attr.profile = Profile::attribute;
  attr.role_attributes = std::map<std::string, std::string>{{"role", "physician"}};
  const Certificate c = Certificate::decode(w.h.issue_end_entity("pop", attr).certificate.encode());
  ASSERT_TRUE(c.fields.role_attributes);
  EXPECT_EQ(c.fields.role_attributes->at("role"), "physician");
}

TEST(Issuance, PolicyAndRequestGates) {
  World w;
  w.population({Profile::identity_auth});
  IssueRequest sig = auth_request(w.rng, "bob");
  sig.profile = Profile::signature;
  EXPECT_EQ(error_code([&] { w.h.issue_end_entity("pop", sig); }), "policy-violation");
  IssueRequest longer = auth_request(w.rng, "bob");
  longer.validity_days = 3651;
  EXPECT_EQ(error_code([&] { w.h.issue_end_entity("pop", longer); }), "policy-violation");
  IssueRequest roles = auth_request(w.rng, "bob");
  roles.role_attributes = std::map<std::string, std::string>{{"role", "x"}};
  EXPECT_EQ(error_code([&] { w.h.issue_end_entity("pop", roles); }), "request-malformed");
}

TEST(Issuance, SerialsIncreaseFromOnePerIssuer) {
  World w;
  w.population();
  for (std::uint64_t expected = 1; expected <= 20; ++expected) {
    EXPECT_EQ(w.h.issue_end_entity("pop", auth_request(w.rng, "s")).certificate.fields.serial, expected);
  }
}

TEST(Escrow, RecoverDecryptsAndIsStable) {
  World w;
  w.population();
  IssueRequest enc;
  enc.subject_id = "carol";
  enc.profile = Profile::encryption;
  enc.scheme_id = std::string(kX25519Scheme);
  enc.generate_and_escrow = true;
  const Issuance iss = w.h.issue_end_entity("pop", enc);
  ASSERT_TRUE(iss.escrow);
  ASSERT_TRUE(iss.generated_key);
  EXPECT_EQ(iss.escrow->certificate_serial, iss.certificate.fields.serial);

  const KeyPair first = w.h.recover_escrowed_key("pop", iss.certificate.fields.serial, "officer-1");
  const KeyPair second = w.h.recover_escrowed_key("pop", iss.certificate.fields.serial, "officer-2");
  EXPECT_EQ(first.private_key, second.private_key);
  EXPECT_EQ(first.private_key, iss.generated_key->private_key);
  EXPECT_EQ(derive_encryption_public(first.private_key), iss.certificate.fields.public_key);
  const Bytes ct = encrypt_to(iss.certificate.fields.public_key, to_bytes("tax return"));
  EXPECT_EQ(eidpki::to_string(decrypt_with(first, ct)), "tax return");
  EXPECT_EQ(w.h.recoveries().size(), 2u);

  IssueRequest sig = auth_request(w.rng, "carol");
  sig.profile = Profile::signature;
  const Issuance s = w.h.issue_end_entity("pop", sig);
  EXPECT_EQ(error_code([&] { w.h.recover_escrowed_key("pop", s.certificate.fields.serial, "officer-1"); }),
            "not-escrowed");
  EXPECT_EQ(error_code([&] { w.h.recover_escrowed_key("pop", iss.certificate.fields.serial, ""); }), "unauthorized");
  EXPECT_EQ(w.h.issuer_state("pop").escrow.size(), 1u);
}

TEST(Escrow, OnlyEncryptionProfileMayEscrow) {
  World w;
  w.population();
  IssueRequest r;
  r.subject_id = "dan";
  r.profile = Profile::signature;
  r.generate_and_escrow = true;
  EXPECT_EQ(error_code([&] { w.h.issue_end_entity("pop", r); }), "request-malformed");
}

TEST(Revocation, RevokeIsIdempotentAndAffectsValidation) {
  World w;
  w.population();
  const Issuance iss = w.h.issue_end_entity("pop", auth_request(w.rng, "erin"));
  const std::uint64_t serial = iss.certificate.fields.serial;
  const RevocationAck first = w.h.revoke_certificate("pop", serial, RevocationReason::card_lost, kStart + 10);
  EXPECT_TRUE(first.newly_recorded);
  const RevocationAck again = w.h.revoke_certificate("pop", serial, RevocationReason::superseded, kStart + 20);
  EXPECT_FALSE(again.newly_recorded);
  EXPECT_EQ(again.entry.revoked_at, kStart + 10);
  EXPECT_EQ(w.h.issuer_state("pop").ledger.entries().size(), 1u);

  LedgerChecker checker(w.h);
  auto p = w.path(iss.certificate);
  EXPECT_EQ(validate_certificate_path(*p, w.h.anchors(), checker, kStart + 30).verdict, Verdict::revoked);

  EXPECT_EQ(error_code([&] { w.h.revoke_certificate("pop", 424242, RevocationReason::card_lost, kStart); }),
            "unknown-serial");
  EXPECT_EQ(error_code([&] {
              w.h.revoke_certificate("pop", serial + 0, RevocationReason::card_lost, kStart);  // repeat is fine
            }),
            "no-error");
}

TEST(Revocation, ExpiredNotRevocable) {
  World w;
  w.population();
  IssueRequest r = auth_request(w.rng, "fay");
  r.validity_days = 1;
  const Issuance iss = w.h.issue_end_entity("pop", r);
  EXPECT_EQ(error_code([&] {
              w.h.revoke_certificate("pop", iss.certificate.fields.serial, RevocationReason::card_lost,
                                     iss.certificate.fields.not_after + 1);
            }),
            "not-revocable");
}

TEST(Revocation, RevokingPopulationCertificateRevokesItsLeaves) {
  World w;
  const CertificationAuthority& pop = w.population();
  const Issuance iss = w.h.issue_end_entity("pop", auth_request(w.rng, "gus"));
  w.h.revoke_certificate("root", pop.ca_certificate.fields.serial, RevocationReason::key_compromise, kStart);
  LedgerChecker checker(w.h);
  EXPECT_EQ(validate_certificate_path(*w.path(iss.certificate), w.h.anchors(), checker, kStart + 1).verdict,
            Verdict::revoked);
}

TEST(Persistence, RecordsRoundTripAndContainersSealed) {
  World w;
  const CertificationAuthority& pop = w.population();
  EXPECT_EQ(CertificationAuthority::decode(pop.encode()).encode(), pop.encode());
  const Bytes seal_key = w.rng.bytes(kSymmetricKeySize);
  const KeyContainer& c = w.h.key_store().at(pop.key_container_id);
  const Bytes sealed = seal_container(c, seal_key, w.rng);
  const Bytes& priv = c.key(kSigningKeyLabel).private_key;
  EXPECT_EQ(std::search(sealed.begin(), sealed.end(), priv.begin(), priv.begin() + 16), sealed.end());
  const KeyContainer back = open_container(sealed, seal_key);
  EXPECT_EQ(back.key(kSigningKeyLabel).private_key, priv);
  EXPECT_EQ(back.secrets, c.secrets);
}

TEST(Policy, ValidationAndEncoding) {
  EXPECT_EQ(error_code([] { make_policy("p", "t", {}, 10); }), "policy-invalid");
  EXPECT_EQ(error_code([] { make_policy("p", "t", {Profile::ca}, 0); }), "policy-invalid");
  const CertificatePolicy p = make_policy("p", "t", {Profile::ca, Profile::signature}, 10);
  EXPECT_EQ(p.rfc2527_sections.size(), 8u);
  const CertificatePolicy back = CertificatePolicy::decode(p.encode());
  EXPECT_EQ(back.allowed_profiles, p.allowed_profiles);
  EXPECT_EQ(back.rfc2527_sections, p.rfc2527_sections);
}

}  // namespace
}  // namespace eidpki::ca
