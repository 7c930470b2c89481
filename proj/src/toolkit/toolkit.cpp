#include "eidpki/toolkit/toolkit.hpp"

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"
#include "eidpki/core/signature_scheme.hpp"

namespace eidpki::toolkit {

std::string_view to_string(ValidationMode mode) {
  return mode == ValidationMode::crl_local ? "crl" : "ocsp";
}

ValidationMode validation_mode_from_string(std::string_view name) {
  if (name == "crl" || name == "crl_local") return ValidationMode::crl_local;
  if (name == "ocsp" || name == "ocsp_online") return ValidationMode::ocsp_online;
  throw Error("request-malformed", "unknown validation mode " + std::string(name));
}

std::string_view to_string(VerifyMode mode) { return mode == VerifyMode::local ? "local" : "outsourced"; }

VerifyMode verify_mode_from_string(std::string_view name) {
  if (name == "local") return VerifyMode::local;
  if (name == "outsourced") return VerifyMode::outsourced;
  throw Error("request-malformed", "unknown verify mode " + std::string(name));
}

std::string_view to_string(Factor factor) {
  switch (factor) {
    case Factor::possession: return "possession";
    case Factor::pin: return "pin";
    case Factor::biometric: return "biometric";
  }
  return "?";
}

std::string_view to_string(AuthOutcome outcome) {
  return outcome == AuthOutcome::authenticated ? "authenticated" : "denied";
}

Bytes SignedDocument::encode() const {
  RecordWriter w;
  w.bytes("document_hash", document_hash)
      .bytes("signature", signature)
      .str("signer_issuer_id", signer_issuer_id)
      .u64("signer_cert_serial", signer_cert_serial)
      .i64("signing_time", signing_time);
  if (timestamp_token) w.bytes("timestamp_token", timestamp_token->encode());
  return w.finish();
}

SignedDocument SignedDocument::decode(ByteView encoded) {
  RecordReader r(encoded);
  SignedDocument d;
  d.document_hash = r.bytes("document_hash");
  d.signature = r.bytes("signature");
  d.signer_issuer_id = r.str("signer_issuer_id");
  d.signer_cert_serial = r.u64("signer_cert_serial");
  d.signing_time = r.i64("signing_time");
  if (r.has("timestamp_token")) d.timestamp_token = revocation::TimestampToken::decode(r.bytes("timestamp_token"));
  return d;
}

Toolkit::Toolkit(ToolkitConfig config) : config_(std::move(config)) {
  if (!config_.clock) config_.clock = system_clock();
}

namespace {

// Key of a public-file signer, through anchors and repository signatures
// only; nothing online is consulted.
std::optional<IssuerKey> resolve_signer(std::string_view signer_id, const TrustAnchorSet& anchors,
                                        const CertificateDirectory* repository) {
  if (const TrustAnchor* anchor = anchors.find(signer_id)) return *anchor;
  if (!repository) return std::nullopt;
  const std::optional<Certificate> cert = repository->find_ca(signer_id);
  if (!cert) return std::nullopt;
  const PathBuildResult built = build_certificate_path(*cert, *repository, anchors);
  if (!built.path || !verify_path_signatures(*built.path, anchors)) return std::nullopt;
  return IssuerKey{cert->fields.subject_id, cert->fields.public_key, cert->fields.scheme_id};
}

}  // namespace

IdentityRecord Toolkit::read_public_data(card::Card& card) const {
  const std::vector<card::PublicDataFile> files = card::read_public_data(card);
  IdentityRecord record;
  record.card_id = card.card_id();
  std::map<std::string, IssuerKey> keys;
  for (const card::PublicDataFile& file : files) {
    auto key = keys.find(file.signer_id);
    if (key == keys.end()) {
      const std::optional<IssuerKey> resolved = resolve_signer(file.signer_id, config_.anchors, config_.repository);
      if (!resolved) throw Error("data-tampered", "cannot resolve signer " + file.signer_id);
      key = keys.emplace(file.signer_id, *resolved).first;
    }
    if (!card::verify_public_file(file, key->second)) {
      throw Error("data-tampered", "signature on " + file.file_id + " does not verify");
    }
  }
  for (const card::PublicDataFile& file : files) {
    try {
      for (auto& [name, value] : decode_string_map(file.content)) record.fields.insert_or_assign(name, value);
    } catch (const Error&) {
      throw Error("data-tampered", "file " + file.file_id + " is not a field record");
    }
  }
  return record;
}

ValidationOutcome Toolkit::validate_certificate(const Certificate& cert, ValidationMode mode, UnixTime at) const {
  if (!config_.repository) throw Error("validation-unavailable", "no certificate repository configured");
  const PathBuildResult built = build_certificate_path(cert, *config_.repository, config_.anchors);
  if (!built.path) return ValidationOutcome{Verdict::no_path, at, RevocationSource::none, built.detail};
  if (mode == ValidationMode::crl_local) {
    if (!config_.crls) throw Error("validation-unavailable", "no CRLs downloaded");
    CrlChecker checker(*config_.crls);
    return validate_certificate_path(*built.path, config_.anchors, checker, at);
  }
  if (!config_.services) throw Error("validation-unavailable", "no OCSP responder configured");
  if (!config_.rng) throw Error("validation-unavailable", "no randomness source for OCSP nonces");
  OcspChecker checker(*config_.services, *config_.rng);
  return validate_certificate_path(*built.path, config_.anchors, checker, at);
}

AuthResult Toolkit::authenticate(card::Card& card, const card::Sam& sam, std::string_view pin, ValidationMode mode,
                                 const std::optional<card::FingerprintTemplate>& probe) const {
  if (!config_.rng) throw Error("request-malformed", "authentication needs a challenge source");
  AuthResult result;
  auto deny = [&](std::string step, std::string detail) {
    result.outcome = AuthOutcome::denied;
    result.transcript.push_back({std::move(step), false, std::move(detail)});
    return result;
  };
  const UnixTime now = config_.clock();

  Certificate cert;
  try {
    cert = card::read_card_certificate(card, card::CardKey::auth);
  } catch (const Error& e) {
    return deny("read-certificate", e.code());
  }
  result.transcript.push_back({"read-certificate", true, cert.fields.issuer_id + "/" + std::to_string(cert.fields.serial)});

  std::optional<card::SecureChannel> channel;
  try {
    channel.emplace(card::SecureChannel::open(card, sam, card::Applet::pki));
  } catch (const Error& e) {
    if (e.code() == "card-busy") throw;
    return deny("channel", e.code());
  }
  result.factors_passed.insert(Factor::possession);
  result.transcript.push_back({"channel", true, "pki applet"});

  try {
    const card::PinResult pin_result = card::verify_pin(*channel, pin);
    if (pin_result.outcome != card::PinOutcome::ok) {
      return deny("pin", std::string(card::to_string(pin_result.outcome)) + ", " +
                             std::to_string(pin_result.retries_remaining) + " retries remaining");
    }
  } catch (const Error& e) {
    return deny("pin", e.code());
  }
  result.factors_passed.insert(Factor::pin);
  result.transcript.push_back({"pin", true, ""});

  const Bytes challenge = config_.rng->bytes(kHashSize);
  try {
    const Bytes response = card::card_sign(*channel, card::CardKey::auth, challenge, false);
    if (!verify_message(cert.fields.scheme_id, cert.fields.public_key, challenge, response)) {
      return deny("challenge", "response does not verify under the authentication certificate");
    }
  } catch (const Error& e) {
    return deny("challenge", e.code());
  }
  result.transcript.push_back({"challenge", true, ""});
  channel->close();

  result.cert_outcome = validate_certificate(cert, mode, now);
  if (result.cert_outcome.verdict != Verdict::valid) {
    return deny("certificate-validation", std::string(to_string(result.cert_outcome.verdict)));
  }
  result.transcript.push_back({"certificate-validation", true, std::string(to_string(mode))});

  if (probe) {
    try {
      card::SecureChannel moc = card::SecureChannel::open(card, sam, card::Applet::moc);
      const card::MatchResult match = card::moc_match(moc, *probe);
      if (!match.decision) return deny("biometric", "score " + std::to_string(match.score));
    } catch (const Error& e) {
      if (e.code() == "card-busy") throw;
      return deny("biometric", e.code());
    }
    result.factors_passed.insert(Factor::biometric);
    result.transcript.push_back({"biometric", true, "match on card"});
  }
  result.outcome = AuthOutcome::authenticated;
  return result;
}

bool Toolkit::match_off_card(card::Card& card, const card::Sam& sam, const card::FingerprintTemplate& probe,
                             double threshold) const {
  card::SecureChannel channel = card::SecureChannel::open(card, sam, card::Applet::id);
  const card::FingerprintTemplate enrolled = card::read_fingerprint_template(channel);
  channel.close();
  return card::match_templates(enrolled, probe, threshold).decision;
}

bool Toolkit::match_on_card(card::Card& card, const card::Sam& sam, const card::FingerprintTemplate& probe) const {
  card::SecureChannel channel = card::SecureChannel::open(card, sam, card::Applet::moc);
  return card::moc_match(channel, probe).decision;
}

SignedDocument Toolkit::sign(card::Card& card, const card::Sam& sam, std::string_view pin, ByteView document,
                             bool request_timestamp, ValidationMode mode) const {
  const UnixTime now = config_.clock();
  const Bytes hash = sha256(document);
  const Certificate cert = card::read_card_certificate(card, card::CardKey::sign);
  const ValidationOutcome outcome = validate_certificate(cert, mode, now);
  if (outcome.verdict != Verdict::valid) {
    throw Error("signing-refused", "signature certificate is " + std::string(to_string(outcome.verdict)));
  }

  card::SecureChannel channel = card::SecureChannel::open(card, sam, card::Applet::pki);
  const card::PinResult pin_result = card::verify_pin(channel, pin);
  if (pin_result.outcome == card::PinOutcome::blocked) throw Error("pin-blocked", "PIN is blocked");
  if (pin_result.outcome != card::PinOutcome::ok) {
    throw Error("pin-required", "PIN rejected, " + std::to_string(pin_result.retries_remaining) + " retries remaining");
  }
  const Bytes signature = card::card_sign(channel, card::CardKey::sign, hash, true);
  channel.close();
  if (!verify_message(cert.fields.scheme_id, cert.fields.public_key, hash, signature)) {
    throw Error("signing-refused", "card signature does not verify under its certificate");
  }

  SignedDocument doc{hash, signature, cert.fields.issuer_id, cert.fields.serial, now, std::nullopt};
  if (request_timestamp) {
    if (!config_.services) throw Error("validation-unavailable", "no time-stamping service configured");
    doc.timestamp_token = config_.services->tsa_stamp(hash);
    if (doc.timestamp_token->document_hash != hash) throw Error("tsa-invalid", "token binds a different hash");
  }
  return doc;
}

SignatureVerification Toolkit::verify_signature(const SignedDocument& doc, VerifyMode mode) const {
  const UnixTime now = config_.clock();
  if (doc.timestamp_token && doc.timestamp_token->document_hash != doc.document_hash) {
    SignatureVerification bad;
    bad.outcome = ValidationOutcome{Verdict::bad_signature, now, RevocationSource::none, "timestamp binds another hash"};
    bad.transcript.push_back({"timestamp", false, bad.outcome.detail});
    return bad;
  }
  const SignatureCheckRequest request{doc.document_hash, doc.signature, doc.signer_issuer_id, doc.signer_cert_serial};
  if (mode == VerifyMode::outsourced) {
    if (!config_.services) throw Error("validation-unavailable", "no validation service configured");
    return config_.services->validate_signature(request);
  }
  if (!config_.repository) throw Error("validation-unavailable", "no certificate repository configured");
  if (!config_.crls) throw Error("validation-unavailable", "no CRLs downloaded");
  CrlChecker checker(*config_.crls);
  return verify_signed_hash(request, *config_.repository, config_.anchors, checker, now);
}

void download_crls(ValidationServices& services, const std::vector<std::string>& ca_ids, CrlStore& store) {
  for (const std::string& id : ca_ids) store.put(services.crl_fetch(id));
}

}  // namespace eidpki::toolkit
