#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <thread>

#include "eidpki/card/terminal.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki::card {
namespace {

constexpr UnixTime kNow = 1'750'000'000;

std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "no-error";
}

bool contains(ByteView haystack, ByteView needle) {
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

Certificate issue(const KeyPair& issuer, const KeyPair& subject, Profile profile, std::uint64_t serial) {
  CertificateFields f;
  f.serial = serial;
  f.subject_id = "citizen-1";
  f.issuer_id = "pop";
  f.profile = profile;
  f.public_key = subject.public_key;
  f.scheme_id = subject.scheme_id;
  f.key_length_bits = subject.key_length_bits;
  f.not_before = kNow - kSecondsPerDay;
  f.not_after = kNow + 365 * kSecondsPerDay;
  f.policy_id = "pol-pop";
  return sign_certificate(issuer, f);
}

struct Fixture {
  Random rng{606};
  KeyPair issuer = generate_key_pair(kEd25519Scheme, kCaKeyLengthBits, rng);
  KeyPair auth = generate_key_pair(kEd25519Scheme, kUserKeyLengthBits, rng);
  KeyPair sign = generate_key_pair(kEd25519Scheme, kUserKeyLengthBits, rng);
  Bytes master = rng.bytes(kSymmetricKeySize);
  FingerprintTemplate finger = synthesize_template(rng, 36);
  std::vector<PublicDataFile> files;
  std::unique_ptr<Card> card;
  Sam sam{"sam-1", {{"sm-master", master}}};

  Fixture() {
    files.push_back(sign_public_file("EF.ID", to_bytes("name=Alya;dob=1980-01-01"), "pop", issuer));
    files.push_back(sign_public_file("EF.PORTRAIT", to_bytes("portrait-ref:42"), "pop", issuer));
    Personalization p;
    p.card_id = "card-0001";
    p.files = files;
    p.auth_pair = auth;
    p.auth_certificate = issue(issuer, auth, Profile::identity_auth, 1);
    p.sign_pair = sign;
    p.sign_certificate = issue(issuer, sign, Profile::signature, 2);
    p.pin = "1234";
    p.fingerprint = finger;
    p.sm_master_key_label = "sm-master";
    p.sm_master_key = master;
    p.unblock_authority = IssuerKey{"pop", issuer.public_key, issuer.scheme_id};
    card = Card::personalize(p, rng);
  }

  IssuerKey issuer_key() const { return IssuerKey{"pop", issuer.public_key, issuer.scheme_id}; }
  SecureChannel open(Applet applet) { return SecureChannel::open(*card, sam, applet); }
};

TEST(PublicData, ReadBackVerbatimWithoutChannelOrPin) {
  Fixture fx;
  EXPECT_EQ(read_public_data(*fx.card), fx.files);
  for (const PublicDataFile& f : read_public_data(*fx.card)) EXPECT_TRUE(verify_public_file(f, fx.issuer_key()));
  {
    SecureChannel ch = fx.open(Applet::pki);
    for (int i = 0; i < 3; ++i) verify_pin(ch, "9999");
  }
  ASSERT_TRUE(fx.card->pin_blocked());
  EXPECT_EQ(read_public_data(*fx.card), fx.files);
  EXPECT_EQ(fx.card->channel_opens(), 1u);
}

TEST(PublicData, TamperedContentFailsVerification) {
  Fixture fx;
  PublicDataFile f = read_public_data(*fx.card).front();
  f.content[0] ^= 1;
  EXPECT_FALSE(verify_public_file(f, fx.issuer_key()));
}

TEST(Channel, MatchingSamOpensWrongKeyRefused) {
  Fixture fx;
  SecureChannel ch = fx.open(Applet::pki);
  EXPECT_TRUE(ch.is_open());
  EXPECT_EQ(verify_pin(ch, "1234").outcome, PinOutcome::ok);
  ch.close();

  Sam wrong("sam-2", {{"sm-master", fx.rng.bytes(kSymmetricKeySize)}});
  EXPECT_EQ(error_code([&] { SecureChannel::open(*fx.card, wrong, Applet::pki); }), "channel-refused");
  Sam missing("sam-3", {{"other", fx.master}});
  EXPECT_EQ(error_code([&] { SecureChannel::open(*fx.card, missing, Applet::pki); }), "channel-refused");
}

TEST(Channel, ReplayedCounterClosesChannel) {
  Fixture fx;
  SecureChannel ch = fx.open(Applet::pki);
  const Bytes frame = ch.wrap(Ins::verify_pin, to_bytes("1234"));
  ch.unwrap(Ins::verify_pin, fx.card->transmit(frame));
  const ParsedResponse replay = parse_response(fx.card->transmit(frame));
  EXPECT_EQ(replay.status, Status::channel_closed);
  EXPECT_EQ(error_code([&] { verify_pin(ch, "1234"); }), "channel-required");
  EXPECT_FALSE(ch.is_open());
}

TEST(Channel, AnySingleBitFlipRejectsThatAndAllLaterMessages) {
  Fixture fx;
  std::size_t frames_tested = 0;
  for (std::size_t bit = 0;; bit += 3) {
    SecureChannel ch = fx.open(Applet::pki);
    verify_pin(ch, "1234");
    Bytes frame = ch.wrap(Ins::sign, concat({Bytes{1, 0}, sha256(to_bytes("m"))}));
    if (bit >= frame.size() * 8) break;
    frame[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    const ParsedResponse r = parse_response(fx.card->transmit(frame));
    EXPECT_NE(r.status, Status::ok) << "bit " << bit;
    EXPECT_FALSE(fx.card->channel_open()) << "bit " << bit;
    // The honest continuation is refused as well.
    EXPECT_NE(error_code([&] { card_sign(ch, CardKey::auth, sha256(to_bytes("n")), false); }), "no-error");
    ++frames_tested;
  }
  EXPECT_GT(frames_tested, 100u);
}

TEST(Channel, ResponseTamperDetectedByTerminal) {
  Fixture fx;
  SecureChannel ch = fx.open(Applet::pki);
  Bytes response = fx.card->transmit(ch.wrap(Ins::verify_pin, to_bytes("1234")));
  response[6] ^= 0x01;
  EXPECT_EQ(error_code([&] { ch.unwrap(Ins::verify_pin, response); }), "channel-closed");
  EXPECT_FALSE(ch.is_open());
}

// Reference automaton over (retries, blocked, verified).
struct PinAutomaton {
  int retries = 3;
  bool blocked = false;
  PinOutcome step(bool correct) {
    if (blocked) return PinOutcome::blocked;
    if (correct) {
      retries = 3;
      return PinOutcome::ok;
    }
    if (--retries == 0) {
      blocked = true;
      return PinOutcome::blocked;
    }
    return PinOutcome::wrong;
  }
};

TEST(Pin, SequencesMatchThreeCounterAutomaton) {
  for (unsigned mask = 0; mask < (1u << 6); ++mask) {
    Fixture fx;
    PinAutomaton oracle;
    SecureChannel ch = fx.open(Applet::pki);
    for (int i = 0; i < 6; ++i) {
      const bool correct = mask & (1u << i);
      const PinResult got = verify_pin(ch, correct ? "1234" : "0000");
      const PinOutcome expected = oracle.step(correct);
      ASSERT_EQ(got.outcome, expected) << "mask " << mask << " step " << i;
      if (expected == PinOutcome::wrong) {
        EXPECT_EQ(got.retries_remaining, oracle.retries);
      }
    }
    EXPECT_EQ(fx.card->pin_blocked(), oracle.blocked);
  }
}

TEST(Pin, ThreeWrongBlocksThenUnblockRestores) {
  Fixture fx;
  SecureChannel ch = fx.open(Applet::pki);
  EXPECT_EQ(verify_pin(ch, "1111").outcome, PinOutcome::wrong);
  EXPECT_EQ(verify_pin(ch, "1111").outcome, PinOutcome::wrong);
  EXPECT_EQ(verify_pin(ch, "1111").outcome, PinOutcome::blocked);
  EXPECT_EQ(verify_pin(ch, "1234").outcome, PinOutcome::blocked);
  EXPECT_EQ(error_code([&] { card_sign(ch, CardKey::auth, sha256(to_bytes("x")), false); }), "pin-blocked");

  const Bytes forged = sign_message(fx.auth, unblock_message(fx.card->card_id()));
  EXPECT_EQ(error_code([&] { unblock_pin(ch, forged, "5678"); }), "unauthorized");
  EXPECT_TRUE(fx.card->pin_blocked());

  const Bytes admin = sign_message(fx.issuer, unblock_message(fx.card->card_id()));
  unblock_pin(ch, admin, "5678");
  EXPECT_FALSE(fx.card->pin_blocked());
  EXPECT_EQ(verify_pin(ch, "5678").outcome, PinOutcome::ok);
  EXPECT_EQ(fx.card->retries_remaining(), 3);
}

TEST(Pin, UnblockOnUnblockedCardResetsRetries) {
  Fixture fx;
  SecureChannel ch = fx.open(Applet::pki);
  verify_pin(ch, "0000");
  EXPECT_EQ(fx.card->retries_remaining(), 2);
  unblock_pin(ch, sign_message(fx.issuer, unblock_message(fx.card->card_id())), "2468");
  EXPECT_EQ(fx.card->retries_remaining(), 3);
}

TEST(Pin, FormatEnforcedAtPersonalization) {
  EXPECT_EQ(error_code([] { check_pin_format("123"); }), "pin-invalid");
  EXPECT_EQ(error_code([] { check_pin_format("123456789"); }), "pin-invalid");
  EXPECT_EQ(error_code([] { check_pin_format("12a4"); }), "pin-invalid");
  EXPECT_EQ(error_code([] { check_pin_format("00000000"); }), "no-error");
}

TEST(Sign, AuthChallengeVerifiesUnderAuthCertificate) {
  Fixture fx;
  const Certificate cert = read_card_certificate(*fx.card, CardKey::auth);
  SecureChannel ch = fx.open(Applet::pki);
  const Bytes challenge = fx.rng.bytes(32);
  EXPECT_EQ(error_code([&] { card_sign(ch, CardKey::auth, challenge, false); }), "pin-required");
  verify_pin(ch, "1234");
  const Bytes sig = card_sign(ch, CardKey::auth, challenge, false);
  EXPECT_TRUE(verify_message(cert.fields.scheme_id, cert.fields.public_key, challenge, sig));
}

TEST(Sign, SignatureKeyNeedsPerSignatureConfirmation) {
  Fixture fx;
  const Certificate cert = read_card_certificate(*fx.card, CardKey::sign);
  SecureChannel ch = fx.open(Applet::pki);
  const Bytes h = sha256(to_bytes("contract"));
  verify_pin(ch, "1234");
  EXPECT_EQ(error_code([&] { card_sign(ch, CardKey::sign, h, false); }), "pin-required");
  verify_pin(ch, "1234");
  const Bytes sig = card_sign(ch, CardKey::sign, h, true);
  EXPECT_TRUE(verify_message(cert.fields.scheme_id, cert.fields.public_key, h, sig));
  EXPECT_EQ(error_code([&] { card_sign(ch, CardKey::sign, h, true); }), "pin-required");
  verify_pin(ch, "1234");
  EXPECT_EQ(card_sign(ch, CardKey::sign, h, true), sig);
}

TEST(Sign, FiftyPayloadsVerifyWithDistinctSignatures) {
  Fixture fx;
  const Certificate cert = read_card_certificate(*fx.card, CardKey::auth);
  SecureChannel ch = fx.open(Applet::pki);
  verify_pin(ch, "1234");
  std::set<Bytes> sigs;
  for (int i = 0; i < 50; ++i) {
    const Bytes h = fx.rng.bytes(32);
    const Bytes sig = card_sign(ch, CardKey::auth, h, false);
    EXPECT_TRUE(verify_message(cert.fields.scheme_id, cert.fields.public_key, h, sig));
    sigs.insert(sig);
  }
  EXPECT_EQ(sigs.size(), 50u);
}

TEST(Sign, ClosingChannelClearsPinVerification) {
  Fixture fx;
  {
    SecureChannel ch = fx.open(Applet::pki);
    verify_pin(ch, "1234");
    card_sign(ch, CardKey::auth, sha256(to_bytes("a")), false);
  }
  SecureChannel ch = fx.open(Applet::pki);
  EXPECT_EQ(error_code([&] { card_sign(ch, CardKey::auth, sha256(to_bytes("b")), false); }), "pin-required");
}

TEST(Template, ReadRequiresChannel) {
  Fixture fx;
  EXPECT_EQ(error_code([&] { read_fingerprint_template(*fx.card); }), "channel-required");
  SecureChannel ch = fx.open(Applet::id);
  EXPECT_EQ(read_fingerprint_template(ch), fx.finger);
}

TEST(Template, TamperedMacFailsRead) {
  Fixture fx;
  SecureChannel ch = fx.open(Applet::id);
  Bytes frame = ch.wrap(Ins::read_template, {});
  frame.back() ^= 0x80;
  EXPECT_EQ(parse_response(fx.card->transmit(frame)).status, Status::channel_closed);
  EXPECT_EQ(error_code([&] { read_fingerprint_template(ch); }), "channel-required");
}

TEST(Template, WrongAppletRefused) {
  Fixture fx;
  SecureChannel ch = fx.open(Applet::pki);
  EXPECT_EQ(error_code([&] { read_fingerprint_template(ch); }), "wrong-applet");
}

TEST(Moc, IdentityAndEmptyProbe) {
  Fixture fx;
  SecureChannel ch = fx.open(Applet::moc);
  const MatchResult same = moc_match(ch, fx.finger);
  EXPECT_DOUBLE_EQ(same.score, 1.0);
  EXPECT_TRUE(same.decision);
  const MatchResult empty = moc_match(ch, FingerprintTemplate{});
  EXPECT_DOUBLE_EQ(empty.score, 0.0);
  EXPECT_FALSE(empty.decision);
  const MatchResult genuine = moc_match(ch, recapture(fx.finger, fx.rng, 3, 2));
  EXPECT_EQ(genuine.decision, match_templates(fx.finger, recapture(fx.finger, fx.rng, 0, 0)).decision);
}

TEST(Traffic, MatchOnCardNeverSendsTemplateOut) {
  Fixture fx;
  fx.card->clear_traffic();
  const FingerprintTemplate probe = recapture(fx.finger, fx.rng, 2, 0);
  {
    SecureChannel ch = fx.open(Applet::moc);
    moc_match(ch, probe);
  }
  const Bytes enrolled = fx.finger.encode();
  const Bytes probe_bytes = probe.encode();
  bool probe_sent = false;
  for (const TrafficRecord& t : fx.card->traffic()) {
    if (!t.to_card) {
      EXPECT_FALSE(contains(t.frame, ByteView(enrolled).subspan(8, 24)));
    }
    if (t.to_card && contains(t.frame, probe_bytes)) probe_sent = true;
  }
  EXPECT_TRUE(probe_sent);
}

TEST(Traffic, OffCardReadNeverSendsProbeIn) {
  Fixture fx;
  const FingerprintTemplate probe = recapture(fx.finger, fx.rng, 2, 0);
  fx.card->clear_traffic();
  FingerprintTemplate enrolled;
  {
    SecureChannel ch = fx.open(Applet::id);
    enrolled = read_fingerprint_template(ch);
  }
  EXPECT_TRUE(match_templates(enrolled, probe).decision);
  const Bytes probe_bytes = probe.encode();
  for (const TrafficRecord& t : fx.card->traffic()) {
    if (t.to_card) {
      EXPECT_FALSE(contains(t.frame, ByteView(probe_bytes).subspan(8, 24)));
    }
  }
}

TEST(Secrecy, SerializedCardHidesKeysAndPin) {
  Fixture fx;
  const Bytes seal_key = fx.rng.bytes(kSymmetricKeySize);
  const Bytes stored = fx.card->serialize(seal_key, fx.rng);
  for (const Bytes* secret : {&fx.auth.private_key, &fx.sign.private_key, &fx.master}) {
    EXPECT_FALSE(contains(stored, ByteView(*secret).first(16)));
  }
  EXPECT_FALSE(contains(stored, to_bytes("1234")));
  EXPECT_FALSE(contains(stored, ByteView(fx.finger.encode()).subspan(8, 24)));

  auto back = Card::deserialize(stored, seal_key, fx.rng);
  SecureChannel ch = SecureChannel::open(*back, fx.sam, Applet::pki);
  EXPECT_EQ(verify_pin(ch, "1234").outcome, PinOutcome::ok);
  const Bytes h = sha256(to_bytes("after restore"));
  EXPECT_TRUE(verify_message(kEd25519Scheme, fx.auth.public_key, h, card_sign(ch, CardKey::auth, h, false)));
  EXPECT_THROW(Card::deserialize(stored, fx.rng.bytes(kSymmetricKeySize), fx.rng), Error);
}

TEST(Concurrency, SecondChannelWaitsForFirst) {
  Fixture fx;
  SecureChannel first = fx.open(Applet::pki);
  EXPECT_EQ(error_code([&] { SecureChannel::open(*fx.card, fx.sam, Applet::pki, std::chrono::milliseconds(20)); }),
            "card-busy");
  std::thread releaser([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    SecureChannel done = std::move(first);
  });
  std::optional<SecureChannel> second;
  std::thread waiter([&] { second.emplace(SecureChannel::open(*fx.card, fx.sam, Applet::pki)); });
  releaser.join();
  waiter.join();
  ASSERT_TRUE(second);
  EXPECT_TRUE(second->is_open());
}

}  // namespace
}  // namespace eidpki::card
