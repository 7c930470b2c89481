#pragma once

// Shared fixture for toolkit and acceptance tests: a root, a population CA,
// an Option-2 virtual sub-CA ("v1") and an Option-1 external sub-CA ("ext"),
// in-process central services, a SAM and card factories.

#include <algorithm>
#include <functional>
#include <memory>
#include <string>

#include "eidpki/ca/hierarchy.hpp"
#include "eidpki/card/card.hpp"
#include "eidpki/card/terminal.hpp"
#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"
#include "eidpki/toolkit/toolkit.hpp"

namespace eidpki::test {

inline constexpr UnixTime kStart = 1'750'000'000;

enum class Topology { direct, option1, option2 };
enum class LeafState { good, revoked, expired, not_yet_valid, bad_signature };

inline constexpr Topology kTopologies[] = {Topology::direct, Topology::option1, Topology::option2};
inline constexpr LeafState kLeafStates[] = {LeafState::good, LeafState::revoked, LeafState::expired,
                                            LeafState::not_yet_valid, LeafState::bad_signature};

inline const char* name(Topology t) {
  switch (t) {
    case Topology::direct: return "direct";
    case Topology::option1: return "option1";
    case Topology::option2: return "option2";
  }
  return "?";
}

inline const char* name(LeafState s) {
  switch (s) {
    case LeafState::good: return "good";
    case LeafState::revoked: return "revoked";
    case LeafState::expired: return "expired";
    case LeafState::not_yet_valid: return "not_yet_valid";
    case LeafState::bad_signature: return "bad_signature";
  }
  return "?";
}

inline Verdict expected_verdict(LeafState s) {
  switch (s) {
    case LeafState::good: return Verdict::valid;
    case LeafState::revoked: return Verdict::revoked;
    case LeafState::expired: return Verdict::expired;
    case LeafState::not_yet_valid: return Verdict::not_yet_valid;
    case LeafState::bad_signature: return Verdict::bad_signature;
  }
  return Verdict::unknown;
}

inline std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "no-error";
}

struct IssuedCard {
  std::unique_ptr<card::Card> card;
  card::FingerprintTemplate finger;
  Certificate auth;
  Certificate sign;
  std::map<std::string, std::string> biographic;
};

struct World {
  Random rng;
  ManualClock clock{kStart};
  ca::Hierarchy h{rng, clock.clock()};
  std::unique_ptr<ca::ExternalCaOperator> ext;
  toolkit::IssuerRegistry registry{h};
  toolkit::LocalServices central{registry, clock.clock()};
  toolkit::CountingServices services{central};
  std::unique_ptr<revocation::TimestampAuthority> tsa;
  Bytes sm_master;
  std::unique_ptr<card::Sam> sam;
  toolkit::CrlStore crls;
  std::uint64_t next_card = 1;

  explicit World(std::uint64_t seed = 1) : rng(seed) {
    const std::set<Profile> leaf{Profile::identity_auth, Profile::signature, Profile::encryption,
                                 Profile::attribute, Profile::device};
    ca::CaConfig root;
    root.ca_id = "root";
    root.policy = ca::make_policy("pol-root", "Root CA", {Profile::ca, Profile::device}, 7300);
    h.init_root_ca(root);

    std::set<Profile> pop_profiles = leaf;
    pop_profiles.insert(Profile::ca);
    ca::CaConfig pop;
    pop.ca_id = "pop";
    pop.policy = ca::make_policy("pol-pop", "Population CA", pop_profiles, 3650);
    h.init_population_ca("root", pop);

    ca::CaConfig v1;
    v1.ca_id = "v1";
    v1.policy = ca::make_policy("pol-v1", "Virtual sub-CA", {Profile::identity_auth, Profile::signature}, 1825);
    v1.validity_days = 1825;
    h.provision_virtual_sub_ca("pop", v1);

    const ca::CertificatePolicy ext_policy =
        ca::make_policy("pol-ext", "External sub-CA", {Profile::ca, Profile::identity_auth, Profile::signature}, 1825);
    h.add_policy(ext_policy);
    ext = std::make_unique<ca::ExternalCaOperator>("ext", std::string(kEd25519Scheme), rng, clock.clock());
    ext->install_certificate(h.certify_external_sub_ca("root", ext->certification_request("pol-ext")), ext_policy);
    registry.add_external(*ext);

    const KeyPair tsa_key = generate_key_pair(kEd25519Scheme, kUserKeyLengthBits, rng);
    ca::IssueRequest tsa_req;
    tsa_req.subject_id = "tsa-1";
    tsa_req.profile = Profile::device;
    tsa_req.public_key = tsa_key.public_key;
    tsa = std::make_unique<revocation::TimestampAuthority>(h.issue_end_entity("root", tsa_req).certificate, tsa_key);
    central.set_tsa(tsa.get());

    sm_master = rng.bytes(kSymmetricKeySize);
    sam = std::make_unique<card::Sam>("sam-1", std::map<std::string, Bytes, std::less<>>{{"sm-master", sm_master}});
  }

  static std::string issuer_of(Topology t) {
    switch (t) {
      case Topology::direct: return "pop";
      case Topology::option1: return "ext";
      case Topology::option2: return "v1";
    }
    return "";
  }

  ca::Issuance issue(Topology t, const ca::IssueRequest& req) {
    if (t == Topology::option1) return ext->issue(req);
    return h.issue_end_entity(issuer_of(t), req);
  }

  const KeyPair& issuer_key(Topology t) {
    return t == Topology::option1 ? ext->key() : h.signing_key(issuer_of(t));
  }

  void revoke(const Certificate& cert) {
    if (cert.fields.issuer_id == "ext") {
      ext->revoke(cert.fields.serial, revocation::RevocationReason::key_compromise, clock.now());
    } else {
      h.revoke_certificate(cert.fields.issuer_id, cert.fields.serial, revocation::RevocationReason::key_compromise,
                           clock.now());
    }
  }

  // A card whose auth and sign certificates both sit in `state`. For
  // bad_signature the card carries certificates with a corrupted signature.
  IssuedCard make_card(Topology t = Topology::direct, LeafState state = LeafState::good, bool forged_key = false,
                       const std::function<void(card::Personalization&)>& tweak = {}) {
    const std::string card_id = "card-" + std::to_string(next_card++);
    IssuedCard out;
    card::Personalization p;
    p.card_id = card_id;
    p.auth_pair = generate_key_pair(kEd25519Scheme, kUserKeyLengthBits, rng);
    p.sign_pair = generate_key_pair(kEd25519Scheme, kUserKeyLengthBits, rng);
    auto request = [&](Profile profile, const KeyPair& k) {
      ca::IssueRequest r;
      r.subject_id = "holder-" + card_id;
      r.profile = profile;
      r.public_key = k.public_key;
      if (state == LeafState::expired) {
        r.not_before = clock.now() - 10 * kSecondsPerDay;
        r.validity_days = 1;
      } else if (state == LeafState::not_yet_valid) {
        r.not_before = clock.now() + 10 * kSecondsPerDay;
      }
      return r;
    };
    p.auth_certificate = issue(t, request(Profile::identity_auth, p.auth_pair)).certificate;
    p.sign_certificate = issue(t, request(Profile::signature, p.sign_pair)).certificate;
    if (state == LeafState::revoked) {
      revoke(p.auth_certificate);
      revoke(p.sign_certificate);
    }
    if (state == LeafState::bad_signature) {
      p.auth_certificate.signature[0] ^= 1;
      p.sign_certificate.signature[0] ^= 1;
    }
    if (forged_key) {
      // Genuine certificate, but the chip holds someone else's private key.
      p.auth_pair.private_key = generate_key_pair(kEd25519Scheme, kUserKeyLengthBits, rng).private_key;
    }
    out.auth = p.auth_certificate;
    out.sign = p.sign_certificate;
    out.biographic = {{"name", "Holder " + card_id}, {"birth_date", "1980-01-01"}, {"nationality", "ARE"}};
    p.files.push_back(card::sign_public_file("biographic", encode_string_map(out.biographic), issuer_of(t),
                                             issuer_key(t)));
    out.finger = card::synthesize_template(rng, 40);
    p.fingerprint = out.finger;
    p.pin = "1234";
    p.sm_master_key_label = "sm-master";
    p.sm_master_key = sm_master;
    p.unblock_authority = h.ca("pop").issuer_key();
    if (tweak) tweak(p);
    out.card = card::Card::personalize(std::move(p), rng);
    return out;
  }

  void refresh_crls() {
    std::vector<std::string> ids = h.ca_ids();
    ids.push_back("ext");
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    toolkit::download_crls(central, ids, crls);
  }

  toolkit::Toolkit toolkit(bool online = true) {
    toolkit::ToolkitConfig cfg;
    cfg.anchors = h.anchors();
    cfg.repository = &registry;
    cfg.services = online ? &services : nullptr;
    cfg.crls = &crls;
    cfg.clock = clock.clock();
    cfg.rng = &rng;
    return toolkit::Toolkit(std::move(cfg));
  }
};

}  // namespace eidpki::test
