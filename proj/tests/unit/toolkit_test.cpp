#include <gtest/gtest.h>

#include "eidpki/core/signature_scheme.hpp"
#include "support/pki_world.hpp"

namespace eidpki::toolkit {
namespace {

using test::IssuedCard;
using test::LeafState;
using test::Topology;
using test::World;
using test::error_code;

std::vector<std::string> step_names(const std::vector<TranscriptStep>& transcript) {
  std::vector<std::string> names;
  for (const TranscriptStep& s : transcript) names.push_back(s.step);
  return names;
}

bool contains_bytes(const Bytes& haystack, const Bytes& needle) {
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

TEST(ReadPublicData, ReturnsFieldsOfflineWithoutChannel) {
  World w;
  IssuedCard c = w.make_card(Topology::option2);
  w.central.set_reachable(false);
  const IdentityRecord r = w.toolkit(false).read_public_data(*c.card);
  EXPECT_EQ(r.fields, c.biographic);
  EXPECT_EQ(r.card_id, c.card->card_id());
  EXPECT_EQ(c.card->channel_opens(), 0u);
  EXPECT_EQ(w.services.counters().total(), 0u);
}

TEST(ReadPublicData, FlippedContentByteIsTampered) {
  World w;
  IssuedCard c = w.make_card(Topology::direct, LeafState::good, false, [](card::Personalization& p) {
    p.files.push_back(card::PublicDataFile{"extra", encode_string_map({{"x", "y"}}), "pop", {}});
    p.files[0].content[5] ^= 1;
  });
  EXPECT_EQ(error_code([&] { w.toolkit().read_public_data(*c.card); }), "data-tampered");
}

TEST(ReadPublicData, UnknownSignerIsTampered) {
  World w;
  Random other(9);
  const KeyPair rogue = generate_key_pair(kEd25519Scheme, kCaKeyLengthBits, other);
  IssuedCard c = w.make_card(Topology::direct, LeafState::good, false, [&](card::Personalization& p) {
    p.files[0] = card::sign_public_file("biographic", p.files[0].content, "rogue-ca", rogue);
  });
  EXPECT_EQ(error_code([&] { w.toolkit().read_public_data(*c.card); }), "data-tampered");
}

TEST(Authenticate, HappyPathInBothModes) {
  World w;
  IssuedCard c = w.make_card();
  w.refresh_crls();
  w.services.reset();
  const Toolkit tk = w.toolkit();

  const AuthResult offline = tk.authenticate(*c.card, *w.sam, "1234", ValidationMode::crl_local);
  EXPECT_TRUE(offline.authenticated());
  EXPECT_EQ(offline.factors_passed, (std::set<Factor>{Factor::possession, Factor::pin}));
  EXPECT_EQ(offline.cert_outcome.verdict, Verdict::valid);
  EXPECT_EQ(offline.cert_outcome.revocation_source, RevocationSource::crl);
  EXPECT_EQ(step_names(offline.transcript),
            (std::vector<std::string>{"read-certificate", "channel", "pin", "challenge", "certificate-validation"}));
  EXPECT_EQ(w.services.counters().total(), 0u);

  const AuthResult online = tk.authenticate(*c.card, *w.sam, "1234", ValidationMode::ocsp_online);
  EXPECT_TRUE(online.authenticated());
  EXPECT_EQ(online.cert_outcome.revocation_source, RevocationSource::ocsp);
  // Leaf and population CA certificates each need one status answer.
  EXPECT_EQ(w.services.counters().ocsp, 2u);
  EXPECT_EQ(w.services.counters().total(), 2u);
  EXPECT_EQ(c.card->channel_opens(), 2u);
}

TEST(Authenticate, RevokedCertificateDeniedIdenticallyInBothModes) {
  World w;
  IssuedCard c = w.make_card(Topology::direct, LeafState::revoked);
  w.refresh_crls();
  const Toolkit tk = w.toolkit();
  const AuthResult a = tk.authenticate(*c.card, *w.sam, "1234", ValidationMode::crl_local);
  const AuthResult b = tk.authenticate(*c.card, *w.sam, "1234", ValidationMode::ocsp_online);
  EXPECT_FALSE(a.authenticated());
  EXPECT_EQ(a.cert_outcome.verdict, Verdict::revoked);
  EXPECT_EQ(b.cert_outcome.verdict, Verdict::revoked);
  EXPECT_EQ(a.transcript.back().step, "certificate-validation");
}

TEST(Authenticate, ForgedCardKeyDeniedAtChallenge) {
  World w;
  IssuedCard c = w.make_card(Topology::direct, LeafState::good, true);
  w.refresh_crls();
  const AuthResult r = w.toolkit().authenticate(*c.card, *w.sam, "1234", ValidationMode::crl_local);
  EXPECT_FALSE(r.authenticated());
  EXPECT_EQ(r.transcript.back().step, "challenge");
  EXPECT_EQ(r.transcript.back().passed, false);
}

TEST(Authenticate, WrongPinDeniesAndBlockingShowsFailurePoint) {
  World w;
  IssuedCard c = w.make_card();
  w.refresh_crls();
  const Toolkit tk = w.toolkit();
  for (int i = 0; i < 3; ++i) {
    const AuthResult r = tk.authenticate(*c.card, *w.sam, "9999", ValidationMode::crl_local);
    EXPECT_FALSE(r.authenticated());
    EXPECT_EQ(r.factors_passed, std::set<Factor>{Factor::possession});
    EXPECT_EQ(r.transcript.back().step, "pin");
  }
  EXPECT_TRUE(c.card->pin_blocked());
  const AuthResult blocked = tk.authenticate(*c.card, *w.sam, "1234", ValidationMode::crl_local);
  EXPECT_FALSE(blocked.authenticated());
  EXPECT_EQ(blocked.transcript.back().step, "pin");
  EXPECT_NE(blocked.transcript.back().detail.find("blocked"), std::string::npos);
}

TEST(Authenticate, WrongSamKeyDeniesWithoutFactors) {
  World w;
  IssuedCard c = w.make_card();
  w.refresh_crls();
  const card::Sam wrong("sam-x", {{"sm-master", w.rng.bytes(kSymmetricKeySize)}});
  const AuthResult r = w.toolkit().authenticate(*c.card, wrong, "1234", ValidationMode::crl_local);
  EXPECT_FALSE(r.authenticated());
  EXPECT_TRUE(r.factors_passed.empty());
  EXPECT_EQ(r.transcript.back().step, "channel");
}

TEST(Authenticate, MissingResourcesFailClosedAndDistinguishable) {
  World w;
  IssuedCard c = w.make_card();
  w.central.set_reachable(false);
  EXPECT_EQ(error_code([&] { w.toolkit().authenticate(*c.card, *w.sam, "1234", ValidationMode::ocsp_online); }),
            "validation-unavailable");
  EXPECT_EQ(error_code([&] { w.toolkit().authenticate(*c.card, *w.sam, "1234", ValidationMode::crl_local); }),
            "validation-unavailable");
  w.central.set_reachable(true);
  w.refresh_crls();
  w.clock.advance(2 * kSecondsPerDay);
  EXPECT_EQ(error_code([&] { w.toolkit().authenticate(*c.card, *w.sam, "1234", ValidationMode::crl_local); }),
            "crl-stale");
}

TEST(Authenticate, BiometricFactorDecidesWhenProbeSupplied) {
  World w;
  IssuedCard c = w.make_card(Topology::option1);
  w.refresh_crls();
  const Toolkit tk = w.toolkit();
  const AuthResult genuine =
      tk.authenticate(*c.card, *w.sam, "1234", ValidationMode::crl_local, card::recapture(c.finger, w.rng, 3, 2));
  EXPECT_TRUE(genuine.authenticated());
  EXPECT_EQ(genuine.factors_passed, (std::set<Factor>{Factor::possession, Factor::pin, Factor::biometric}));
  const AuthResult impostor =
      tk.authenticate(*c.card, *w.sam, "1234", ValidationMode::crl_local, card::synthesize_template(w.rng, 40));
  EXPECT_FALSE(impostor.authenticated());
  EXPECT_EQ(impostor.transcript.back().step, "biometric");
}

TEST(Match, OffCardAgreesWithOnCardAndNeedsNoServices) {
  World w;
  IssuedCard c = w.make_card();
  w.central.set_reachable(false);
  const Toolkit tk = w.toolkit(false);
  EXPECT_TRUE(tk.match_off_card(*c.card, *w.sam, c.finger));
  EXPECT_TRUE(tk.match_on_card(*c.card, *w.sam, c.finger));
  for (int i = 0; i < 40; ++i) {
    const card::FingerprintTemplate probe = i % 2 ? card::recapture(c.finger, w.rng, 1 + i % 5, w.rng.uniform(20))
                                                  : card::synthesize_template(w.rng, 1 + w.rng.uniform(60));
    EXPECT_EQ(tk.match_off_card(*c.card, *w.sam, probe), tk.match_on_card(*c.card, *w.sam, probe)) << i;
  }
  EXPECT_EQ(w.services.counters().total(), 0u);
}

TEST(Match, OnCardNeverSendsTemplateOutward) {
  World w;
  IssuedCard c = w.make_card();
  const Toolkit tk = w.toolkit(false);
  const Bytes encoded = c.finger.encode();
  const Bytes marker(encoded.begin() + 8, encoded.begin() + 32);
  auto outward_contains = [&] {
    for (const card::TrafficRecord& t : c.card->traffic()) {
      if (!t.to_card && contains_bytes(t.frame, marker)) return true;
    }
    return false;
  };
  c.card->clear_traffic();
  tk.match_on_card(*c.card, *w.sam, c.finger);
  EXPECT_FALSE(outward_contains());
  c.card->clear_traffic();
  tk.match_off_card(*c.card, *w.sam, c.finger);
  EXPECT_TRUE(outward_contains());
}

TEST(Sign, RoundTripWithTimestampInBothVerifyModes) {
  World w;
  IssuedCard c = w.make_card(Topology::option2);
  w.refresh_crls();
  w.services.reset();
  const Toolkit tk = w.toolkit();
  const SignedDocument doc = tk.sign(*c.card, *w.sam, "1234", to_bytes("contract text"), true, ValidationMode::crl_local);
  EXPECT_EQ(doc.document_hash, sha256(to_bytes("contract text")));
  ASSERT_TRUE(doc.timestamp_token);
  EXPECT_EQ(doc.timestamp_token->document_hash, doc.document_hash);
  EXPECT_TRUE(doc.timestamp_token->verify(w.tsa->certificate()));
  EXPECT_EQ(w.services.counters().tsa, 1u);
  EXPECT_EQ(w.services.counters().total(), 1u);

  const SignedDocument back = SignedDocument::decode(doc.encode());
  EXPECT_EQ(back.encode(), doc.encode());
  w.services.reset();
  EXPECT_EQ(tk.verify_signature(back, VerifyMode::local).outcome.verdict, Verdict::valid);
  EXPECT_EQ(w.services.counters().total(), 0u);
  EXPECT_EQ(tk.verify_signature(back, VerifyMode::outsourced).outcome.verdict, Verdict::valid);
  EXPECT_EQ(w.services.counters().validate, 1u);
  EXPECT_EQ(w.services.counters().total(), 1u);
}

TEST(Sign, RefusedForRevokedSignatureCertificateOnly) {
  World w;
  IssuedCard c = w.make_card();
  w.revoke(c.sign);
  w.refresh_crls();
  const Toolkit tk = w.toolkit();
  EXPECT_TRUE(tk.authenticate(*c.card, *w.sam, "1234", ValidationMode::ocsp_online).authenticated());
  EXPECT_EQ(error_code([&] { tk.sign(*c.card, *w.sam, "1234", to_bytes("x"), false, ValidationMode::crl_local); }),
            "signing-refused");
  EXPECT_EQ(error_code([&] { tk.sign(*c.card, *w.sam, "1234", to_bytes("x"), false, ValidationMode::ocsp_online); }),
            "signing-refused");
}

TEST(Sign, WrongPinAndBlockedPinPropagate) {
  World w;
  IssuedCard c = w.make_card();
  w.refresh_crls();
  const Toolkit tk = w.toolkit();
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(error_code([&] { tk.sign(*c.card, *w.sam, "0000", to_bytes("x"), false, ValidationMode::crl_local); }),
              i < 2 ? "pin-required" : "pin-blocked");
  }
  EXPECT_EQ(error_code([&] { tk.sign(*c.card, *w.sam, "1234", to_bytes("x"), false, ValidationMode::crl_local); }),
            "pin-blocked");
}

TEST(Verify, FlippedSignatureBitExitsBeforePathBuild) {
  World w;
  IssuedCard c = w.make_card();
  w.refresh_crls();
  const Toolkit tk = w.toolkit();
  SignedDocument doc = tk.sign(*c.card, *w.sam, "1234", to_bytes("doc"), false, ValidationMode::crl_local);
  doc.signature[10] ^= 0x40;
  for (VerifyMode mode : {VerifyMode::local, VerifyMode::outsourced}) {
    const SignatureVerification v = tk.verify_signature(doc, mode);
    EXPECT_EQ(v.outcome.verdict, Verdict::bad_signature);
    ASSERT_EQ(v.transcript.size(), 1u);
    EXPECT_EQ(v.transcript[0].step, "signature");
  }
}

TEST(Verify, TimestampForOtherDocumentRejected) {
  World w;
  IssuedCard c = w.make_card();
  w.refresh_crls();
  const Toolkit tk = w.toolkit();
  SignedDocument doc = tk.sign(*c.card, *w.sam, "1234", to_bytes("doc"), true, ValidationMode::crl_local);
  doc.timestamp_token = w.tsa->issue(sha256(to_bytes("other")), w.clock.now());
  EXPECT_EQ(tk.verify_signature(doc, VerifyMode::local).outcome.verdict, Verdict::bad_signature);
}

TEST(Verify, OutsourcedUnreachableAndLocalStale) {
  World w;
  IssuedCard c = w.make_card();
  w.refresh_crls();
  const Toolkit tk = w.toolkit();
  const SignedDocument doc = tk.sign(*c.card, *w.sam, "1234", to_bytes("doc"), false, ValidationMode::crl_local);
  w.central.set_reachable(false);
  EXPECT_EQ(error_code([&] { tk.verify_signature(doc, VerifyMode::outsourced); }), "validation-unavailable");
  w.clock.advance(2 * kSecondsPerDay);
  EXPECT_EQ(error_code([&] { tk.verify_signature(doc, VerifyMode::local); }), "crl-stale");
}

// Leaf-state matrix: every state and topology, both authentication modes
// and both verification modes, against the expected verdict.
TEST(ModeEquivalence, LeafStateMatrix) {
  World w;
  struct Case {
    Topology topology;
    LeafState state;
    IssuedCard card;
    SignedDocument doc;
  };
  std::vector<Case> cases;
  for (Topology t : test::kTopologies) {
    for (LeafState s : test::kLeafStates) {
      IssuedCard c = w.make_card(t, s);
      // Documents are signed directly with the card's key so that every
      // state, including unusable certificates, has something to verify.
      SignedDocument doc;
      doc.document_hash = sha256(to_bytes(std::string("doc ") + test::name(s)));
      card::SecureChannel ch = card::SecureChannel::open(*c.card, *w.sam, card::Applet::pki);
      ASSERT_EQ(card::verify_pin(ch, "1234").outcome, card::PinOutcome::ok);
      doc.signature = card::card_sign(ch, card::CardKey::sign, doc.document_hash, true);
      ch.close();
      if (s == LeafState::bad_signature) doc.signature[0] ^= 1;
      doc.signer_issuer_id = c.sign.fields.issuer_id;
      doc.signer_cert_serial = c.sign.fields.serial;
      doc.signing_time = w.clock.now();
      cases.push_back({t, s, std::move(c), doc});
    }
  }
  w.refresh_crls();
  const Toolkit tk = w.toolkit();
  for (Case& k : cases) {
    const std::string label = std::string(test::name(k.topology)) + "/" + test::name(k.state);
    const Verdict expected = test::expected_verdict(k.state);
    const AuthResult crl = tk.authenticate(*k.card.card, *w.sam, "1234", ValidationMode::crl_local);
    const AuthResult ocsp = tk.authenticate(*k.card.card, *w.sam, "1234", ValidationMode::ocsp_online);
    EXPECT_EQ(crl.cert_outcome.verdict, expected) << label;
    EXPECT_EQ(ocsp.cert_outcome.verdict, expected) << label;
    EXPECT_EQ(crl.authenticated(), k.state == LeafState::good) << label;
    EXPECT_EQ(ocsp.authenticated(), k.state == LeafState::good) << label;
    EXPECT_EQ(tk.verify_signature(k.doc, VerifyMode::local).outcome.verdict, expected) << label;
    EXPECT_EQ(tk.verify_signature(k.doc, VerifyMode::outsourced).outcome.verdict, expected) << label;
  }
}

TEST(Checkers, PclAgreesWithCrlOnIssuedCertificates) {
  World w;
  std::vector<IssuedCard> cards;
  for (LeafState s : test::kLeafStates) cards.push_back(w.make_card(Topology::direct, s));
  w.refresh_crls();
  PclChecker pcl;
  pcl.put(w.central.pcl_fetch("pop"));
  CrlChecker crl(w.crls);
  const IssuerKey pop = w.h.ca("pop").issuer_key();
  for (const IssuedCard& c : cards) {
    for (const Certificate* cert : {&c.auth, &c.sign}) {
      if (!verify_certificate_signature(*cert, pop.public_key, pop.scheme_id)) continue;
      EXPECT_EQ(pcl.check(*cert, pop, w.clock.now()).status, crl.check(*cert, pop, w.clock.now()).status);
    }
  }
}

}  // namespace
}  // namespace eidpki::toolkit
