#include "eidpki/ca/hierarchy.hpp"

#include <array>

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki::ca {

using revocation::RevocationEntry;
using revocation::RevocationReason;

namespace {

constexpr std::array<std::pair<CaKind, std::string_view>, 4> kKindNames{{
    {CaKind::root, "root"},
    {CaKind::population, "population"},
    {CaKind::subordinate_external, "subordinate_external"},
    {CaKind::subordinate_virtual, "subordinate_virtual"},
}};

Bytes escrow_context(std::string_view issuer_id, std::uint64_t serial) {
  Bytes ad = to_bytes("escrow:" + std::string(issuer_id) + ":");
  append_u64(ad, serial);
  return ad;
}

void check_public_key(std::string_view scheme_id, ByteView public_key) {
  if (public_key.empty()) throw Error("request-malformed", "public key required");
  if (scheme_id == kX25519Scheme || scheme_id == kEd25519Scheme) {
    if (public_key.size() != 32) throw Error("request-malformed", "public key must be 32 bytes");
    return;
  }
  find_scheme(scheme_id);
}

Issuance issue_into(IssuerState& state, std::string_view issuer_id, const KeyPair& signing,
                    const CertificatePolicy& policy, const IssueRequest& req, UnixTime now, Random& rng,
                    const Bytes* wrap_key) {
  if (req.subject_id.empty()) throw Error("request-malformed", "subject_id required");
  if (req.profile == Profile::ca) throw Error("request-malformed", "CA certificates are issued by CA operations");
  if (!policy.allows(req.profile)) {
    throw Error("policy-violation", "profile " + std::string(to_string(req.profile)) + " not allowed by " +
                                        policy.policy_id);
  }
  if (req.validity_days <= 0) throw Error("invalid-validity", "validity_days must be positive");
  if (req.validity_days > policy.max_validity_days) {
    throw Error("policy-violation", "validity exceeds " + std::to_string(policy.max_validity_days) + " days");
  }
  if (req.role_attributes.has_value() != (req.profile == Profile::attribute)) {
    throw Error("request-malformed", "role_attributes are only carried by attribute certificates");
  }
  if (req.generate_and_escrow && req.profile != Profile::encryption) {
    throw Error("request-malformed", "only encryption keys are escrowed");
  }

  Issuance out;
  CertificateFields f;
  if (req.generate_and_escrow) {
    if (wrap_key == nullptr) throw Error("escrow-unavailable", "issuer has no wrap key");
    out.generated_key = generate_encryption_key_pair(req.key_length_bits, rng);
    f.public_key = out.generated_key->public_key;
    f.scheme_id = std::string(kX25519Scheme);
  } else {
    if (!req.public_key) throw Error("request-malformed", "public key or generate-and-escrow required");
    f.scheme_id = req.profile == Profile::encryption ? std::string(kX25519Scheme) : req.scheme_id;
    check_public_key(f.scheme_id, *req.public_key);
    f.public_key = *req.public_key;
  }
  f.serial = state.next_serial;
  f.subject_id = req.subject_id;
  f.issuer_id = std::string(issuer_id);
  f.profile = req.profile;
  f.key_length_bits = req.key_length_bits;
  f.not_before = req.not_before.value_or(now);
  f.not_after = f.not_before + static_cast<UnixTime>(req.validity_days) * kSecondsPerDay;
  f.policy_id = policy.policy_id;
  f.role_attributes = req.role_attributes;

  out.certificate = sign_certificate(signing, std::move(f));
  const std::uint64_t serial = out.certificate.fields.serial;
  if (out.generated_key) {
    out.escrow = EscrowRecord{serial, std::string(issuer_id),
                              aead_seal(*wrap_key, out.generated_key->private_key, escrow_context(issuer_id, serial), rng),
                              std::string(kWrapKeyLabel), now};
    state.escrow.emplace(serial, *out.escrow);
  }
  state.issued.emplace(serial, out.certificate);
  state.next_serial = serial + 1;
  return out;
}

RevocationAck revoke_in(IssuerState& state, std::string_view ca_id, std::uint64_t serial, RevocationReason reason,
                        UnixTime at) {
  auto it = state.issued.find(serial);
  if (it == state.issued.end()) throw Error("unknown-serial", std::string(ca_id) + "#" + std::to_string(serial));
  const Certificate& cert = it->second;
  if (cert.self_signed()) throw Error("not-revocable", "trust anchor certificate");
  if (const RevocationEntry* existing = state.ledger.find(serial)) {
    return RevocationAck{std::string(ca_id), serial, *existing, false};
  }
  if (at > cert.fields.not_after) throw Error("not-revocable", "certificate already expired");
  RevocationEntry entry{reason, at};
  state.ledger.record(serial, entry);
  return RevocationAck{std::string(ca_id), serial, entry, true};
}

}  // namespace

std::string_view to_string(CaKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "root";
}

CaKind ca_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw Error("decode-error", "unknown CA kind " + std::string(name));
}

std::string_view to_string(CaStatus status) { return status == CaStatus::active ? "active" : "suspended"; }

Bytes CertificationAuthority::encode() const {
  RecordWriter w;
  w.str("ca_id", ca_id)
      .str("kind", to_string(kind))
      .str("key_container_id", key_container_id)
      .bytes("ca_certificate", ca_certificate.encode())
      .str("policy_id", policy_id)
      .str("status", to_string(status));
  if (parent_ca_id) w.str("parent_ca_id", *parent_ca_id);
  return w.finish();
}

CertificationAuthority CertificationAuthority::decode(ByteView encoded) {
  RecordReader r(encoded);
  CertificationAuthority a;
  a.ca_id = r.str("ca_id");
  a.kind = ca_kind_from_string(r.str("kind"));
  a.key_container_id = r.str("key_container_id");
  a.ca_certificate = Certificate::decode(r.bytes("ca_certificate"));
  a.policy_id = r.str("policy_id");
  const std::string status = r.str("status");
  if (status != "active" && status != "suspended") throw Error("decode-error", "CA status " + status);
  a.status = status == "active" ? CaStatus::active : CaStatus::suspended;
  a.parent_ca_id = r.opt_str("parent_ca_id");
  return a;
}

Bytes EscrowRecord::encode() const {
  return RecordWriter()
      .u64("certificate_serial", certificate_serial)
      .str("issuer_id", issuer_id)
      .bytes("wrapped_private_key", wrapped_private_key)
      .str("wrap_key_label", wrap_key_label)
      .i64("created_at", created_at)
      .finish();
}

EscrowRecord EscrowRecord::decode(ByteView encoded) {
  RecordReader r(encoded);
  return EscrowRecord{r.u64("certificate_serial"), r.str("issuer_id"), r.bytes("wrapped_private_key"),
                      r.str("wrap_key_label"), r.i64("created_at")};
}

Hierarchy::Hierarchy(Random& rng, Clock clock) : rng_(rng), clock_(std::move(clock)) {}

KeyContainer& Hierarchy::create_container(const CaConfig& config) {
  KeyContainer& c = keys_.create(config.host_id, config.ca_id);
  c.keys.emplace(std::string(kSigningKeyLabel), generate_key_pair(config.scheme_id, config.key_length_bits, rng_));
  c.secrets.emplace(std::string(kWrapKeyLabel), rng_.bytes(kSymmetricKeySize));
  return c;
}

void Hierarchy::require_active(const CertificationAuthority& authority) const {
  if (authority.status != CaStatus::active) throw Error("ca-suspended", authority.ca_id);
}

void Hierarchy::require_new_id(std::string_view ca_id) const {
  if (ca_id.empty()) throw Error("request-malformed", "ca_id required");
  if (cas_.count(ca_id) != 0) throw Error("id-conflict", std::string(ca_id));
}

void Hierarchy::check_ca_issuance(const CertificationAuthority& issuer, const CertificatePolicy& governing_policy,
                                  int validity_days) const {
  require_active(issuer);
  if (!governing_policy.allows(Profile::ca)) {
    throw Error("policy-violation", "policy " + governing_policy.policy_id + " does not allow CA certificates");
  }
  if (validity_days <= 0) throw Error("invalid-validity", "validity_days must be positive");
  if (validity_days > governing_policy.max_validity_days) {
    throw Error("policy-violation", "validity exceeds " + std::to_string(governing_policy.max_validity_days) + " days");
  }
}

Certificate Hierarchy::issue_ca_certificate(CertificationAuthority& issuer, std::string_view subject_id,
                                            ByteView public_key, std::string_view scheme_id,
                                            std::uint32_t key_length_bits, const CertificatePolicy& governing_policy,
                                            std::string_view subject_policy_id, int validity_days) {
  check_ca_issuance(issuer, governing_policy, validity_days);
  check_public_key(scheme_id, public_key);
  IssuerState& state = mutable_state(issuer.ca_id);
  const UnixTime now = clock_();
  CertificateFields f;
  f.serial = state.next_serial;
  f.subject_id = std::string(subject_id);
  f.issuer_id = issuer.ca_id;
  f.profile = Profile::ca;
  f.public_key.assign(public_key.begin(), public_key.end());
  f.scheme_id = std::string(scheme_id);
  f.key_length_bits = key_length_bits;
  f.not_before = now;
  f.not_after = now + static_cast<UnixTime>(validity_days) * kSecondsPerDay;
  f.policy_id = std::string(subject_policy_id);
  Certificate cert = sign_certificate(signing_key(issuer.ca_id), std::move(f));
  state.issued.emplace(cert.fields.serial, cert);
  state.next_serial = cert.fields.serial + 1;
  return cert;
}

const CertificationAuthority& Hierarchy::init_root_ca(const CaConfig& config) {
  if (root() != nullptr) throw Error("root-exists", root()->ca_id);
  require_new_id(config.ca_id);
  config.policy.validate();
  KeyContainer& container = create_container(config);
  const KeyPair& key = container.key(kSigningKeyLabel);

  const UnixTime now = clock_();
  CertificateFields f;
  f.serial = 1;
  f.subject_id = config.ca_id;
  f.issuer_id = config.ca_id;
  f.profile = Profile::ca;
  f.public_key = key.public_key;
  f.scheme_id = key.scheme_id;
  f.key_length_bits = key.key_length_bits;
  f.not_before = now;
  f.not_after = now + static_cast<UnixTime>(config.validity_days) * kSecondsPerDay;
  f.policy_id = config.policy.policy_id;
  Certificate cert = sign_certificate(key, std::move(f));

  policies_.insert_or_assign(config.policy.policy_id, config.policy);
  CertificationAuthority root{config.ca_id, CaKind::root, container.container_id, cert,
                              config.policy.policy_id, CaStatus::active, std::nullopt};
  IssuerState& state = states_[config.ca_id];
  state.ledger = revocation::RevocationState(config.ca_id);
  state.issued.emplace(1, cert);
  state.next_serial = 2;
  return cas_.emplace(config.ca_id, std::move(root)).first->second;
}

const CertificationAuthority& Hierarchy::init_population_ca(std::string_view root_id, const CaConfig& config) {
  CertificationAuthority& root_ca = mutable_ca(root_id);
  if (root_ca.kind != CaKind::root) throw Error("request-malformed", "population CA must be certified by the root");
  require_active(root_ca);
  require_new_id(config.ca_id);
  config.policy.validate();

  const CertificatePolicy& root_policy = policy(root_ca.policy_id);
  check_ca_issuance(root_ca, root_policy, config.validity_days);

  KeyContainer& container = create_container(config);
  const KeyPair key = container.key(kSigningKeyLabel);
  Certificate cert = issue_ca_certificate(root_ca, config.ca_id, key.public_key, key.scheme_id, key.key_length_bits,
                                          root_policy, config.policy.policy_id, config.validity_days);
  policies_.insert_or_assign(config.policy.policy_id, config.policy);
  CertificationAuthority pop{config.ca_id, CaKind::population, container.container_id, cert,
                             config.policy.policy_id, CaStatus::active, root_ca.ca_id};
  states_[config.ca_id].ledger = revocation::RevocationState(config.ca_id);
  return cas_.emplace(config.ca_id, std::move(pop)).first->second;
}

Certificate Hierarchy::certify_external_sub_ca(std::string_view root_id, const ExternalCaRequest& request) {
  CertificationAuthority& root_ca = mutable_ca(root_id);
  if (root_ca.kind != CaKind::root) throw Error("request-malformed", "external sub-CAs are certified by the root");
  require_new_id(request.subject_id);
  const CertificatePolicy& sub_policy = policy(request.policy_id);
  if (!sub_policy.allows(Profile::ca)) {
    throw Error("policy-violation", "policy " + sub_policy.policy_id + " does not allow CA certificates");
  }
  Certificate cert = issue_ca_certificate(root_ca, request.subject_id, request.public_key, request.scheme_id,
                                          request.key_length_bits, sub_policy, sub_policy.policy_id,
                                          request.validity_days);
  CertificationAuthority sub{request.subject_id, CaKind::subordinate_external, "", cert,
                             sub_policy.policy_id, CaStatus::active, root_ca.ca_id};
  cas_.emplace(request.subject_id, std::move(sub));
  return cert;
}

const CertificationAuthority& Hierarchy::provision_virtual_sub_ca(std::string_view population_id,
                                                                  const CaConfig& config) {
  CertificationAuthority& pop = mutable_ca(population_id);
  if (pop.kind != CaKind::population) {
    throw Error("request-malformed", "virtual sub-CAs are hosted by a population CA");
  }
  require_active(pop);
  require_new_id(config.ca_id);
  config.policy.validate();
  const CertificatePolicy& pop_policy = policy(pop.policy_id);
  check_ca_issuance(pop, pop_policy, config.validity_days);

  CaConfig hosted = config;
  hosted.host_id = keys_.at(pop.key_container_id).host_id;
  KeyContainer& container = create_container(hosted);
  const std::string container_id = container.container_id;
  const KeyPair key = container.key(kSigningKeyLabel);
  Certificate cert = issue_ca_certificate(pop, config.ca_id, key.public_key, key.scheme_id, key.key_length_bits,
                                          pop_policy, config.policy.policy_id, config.validity_days);
  policies_.insert_or_assign(config.policy.policy_id, config.policy);
  CertificationAuthority sub{config.ca_id, CaKind::subordinate_virtual, container_id, cert,
                             config.policy.policy_id, CaStatus::active, pop.ca_id};
  states_[config.ca_id].ledger = revocation::RevocationState(config.ca_id);
  return cas_.emplace(config.ca_id, std::move(sub)).first->second;
}

Issuance Hierarchy::issue_end_entity(std::string_view ca_id, const IssueRequest& request) {
  const CertificationAuthority& authority = ca(ca_id);
  require_active(authority);
  if (!authority.holds_local_keys()) throw Error("no-local-key", "CA " + authority.ca_id + " is operated externally");
  const KeyContainer& container = keys_.at(authority.key_container_id);
  auto wrap = container.secrets.find(kWrapKeyLabel);
  return issue_into(mutable_state(ca_id), authority.ca_id, container.key(kSigningKeyLabel), policy(authority.policy_id),
                    request, clock_(), rng_, wrap == container.secrets.end() ? nullptr : &wrap->second);
}

KeyPair Hierarchy::recover_escrowed_key(std::string_view ca_id, std::uint64_t serial, std::string_view operator_id) {
  if (operator_id.empty()) throw Error("unauthorized", "recovery requires an operator");
  const CertificationAuthority& authority = ca(ca_id);
  IssuerState& state = mutable_state(ca_id);
  auto cert = state.issued.find(serial);
  if (cert == state.issued.end() || cert->second.fields.profile != Profile::encryption) {
    throw Error("not-escrowed", authority.ca_id + "#" + std::to_string(serial));
  }
  auto record = state.escrow.find(serial);
  if (record == state.escrow.end()) throw Error("not-escrowed", authority.ca_id + "#" + std::to_string(serial));

  const KeyContainer& container = keys_.at(authority.key_container_id);
  auto wrap = container.secrets.find(record->second.wrap_key_label);
  if (wrap == container.secrets.end()) throw Error("key-not-found", "wrap key");
  Bytes private_key = aead_open(wrap->second, record->second.wrapped_private_key, escrow_context(authority.ca_id, serial));
  KeyPair recovered{derive_encryption_public(private_key), std::move(private_key), std::string(kX25519Scheme),
                    cert->second.fields.key_length_bits};
  recoveries_.push_back(RecoveryEvent{authority.ca_id, serial, std::string(operator_id), clock_()});
  return recovered;
}

RevocationAck Hierarchy::revoke_certificate(std::string_view ca_id, std::uint64_t serial, RevocationReason reason,
                                            UnixTime at) {
  const CertificationAuthority& authority = ca(ca_id);
  return revoke_in(mutable_state(authority.ca_id), authority.ca_id, serial, reason, at);
}

void Hierarchy::set_status(std::string_view ca_id, CaStatus status) { mutable_ca(ca_id).status = status; }

void Hierarchy::add_policy(const CertificatePolicy& p) {
  p.validate();
  policies_.insert_or_assign(p.policy_id, p);
}

const CertificatePolicy& Hierarchy::policy(std::string_view policy_id) const {
  auto it = policies_.find(policy_id);
  if (it == policies_.end()) throw Error("unknown-policy", std::string(policy_id));
  return it->second;
}

const CertificationAuthority& Hierarchy::ca(std::string_view ca_id) const {
  auto it = cas_.find(ca_id);
  if (it == cas_.end()) throw Error("unknown-ca", std::string(ca_id));
  return it->second;
}

CertificationAuthority& Hierarchy::mutable_ca(std::string_view ca_id) {
  auto it = cas_.find(ca_id);
  if (it == cas_.end()) throw Error("unknown-ca", std::string(ca_id));
  return it->second;
}

IssuerState& Hierarchy::mutable_state(std::string_view ca_id) {
  auto it = states_.find(ca_id);
  if (it == states_.end()) throw Error("unknown-ca", std::string(ca_id));
  return it->second;
}

const CertificationAuthority* Hierarchy::find_authority(std::string_view ca_id) const {
  auto it = cas_.find(ca_id);
  return it == cas_.end() ? nullptr : &it->second;
}

const CertificationAuthority* Hierarchy::root() const {
  for (const auto& [id, a] : cas_) {
    if (a.kind == CaKind::root) return &a;
  }
  return nullptr;
}

std::vector<std::string> Hierarchy::ca_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, a] : cas_) ids.push_back(id);
  return ids;
}

TrustAnchorSet Hierarchy::anchors() const {
  TrustAnchorSet set;
  if (const CertificationAuthority* r = root()) set.add(r->issuer_key());
  return set;
}

const IssuerState& Hierarchy::issuer_state(std::string_view ca_id) const {
  auto it = states_.find(ca_id);
  if (it == states_.end()) throw Error("unknown-ca", std::string(ca_id));
  return it->second;
}

const KeyPair& Hierarchy::signing_key(std::string_view ca_id) const {
  const CertificationAuthority& authority = ca(ca_id);
  if (!authority.holds_local_keys()) throw Error("no-local-key", "CA " + authority.ca_id + " is operated externally");
  return keys_.at(authority.key_container_id).key(kSigningKeyLabel);
}

std::optional<Certificate> Hierarchy::find_ca(std::string_view subject_id) const {
  const CertificationAuthority* a = find_authority(subject_id);
  if (a == nullptr) return std::nullopt;
  return a->ca_certificate;
}

std::optional<Certificate> Hierarchy::find(std::string_view issuer_id, std::uint64_t serial) const {
  auto it = states_.find(issuer_id);
  if (it == states_.end()) return std::nullopt;
  auto cert = it->second.issued.find(serial);
  if (cert == it->second.issued.end()) return std::nullopt;
  return cert->second;
}

void Hierarchy::restore_ca(const CertificationAuthority& authority, std::optional<KeyContainer> container) {
  require_new_id(authority.ca_id);
  if (container) keys_.restore(std::move(*container));
  cas_.emplace(authority.ca_id, authority);
  if (authority.holds_local_keys()) {
    IssuerState& state = states_[authority.ca_id];
    state.ledger = revocation::RevocationState(authority.ca_id);
  }
  const std::string& issuer = authority.ca_certificate.fields.issuer_id;
  restore_issued(issuer, authority.ca_certificate, std::nullopt);
}

void Hierarchy::restore_issued(std::string_view ca_id, const Certificate& certificate,
                               std::optional<EscrowRecord> escrow) {
  IssuerState& state = mutable_state(ca_id);
  const std::uint64_t serial = certificate.fields.serial;
  state.issued.insert_or_assign(serial, certificate);
  if (escrow) state.escrow.insert_or_assign(serial, *escrow);
  if (serial >= state.next_serial) state.next_serial = serial + 1;
}

void Hierarchy::restore_revocation(std::string_view ca_id, std::uint64_t serial, RevocationEntry entry) {
  mutable_state(ca_id).ledger.record(serial, entry);
}

void Hierarchy::restore_recovery(RecoveryEvent event) { recoveries_.push_back(std::move(event)); }

ExternalCaOperator::ExternalCaOperator(std::string ca_id, std::string scheme_id, Random& rng, Clock clock)
    : ca_id_(std::move(ca_id)),
      key_(generate_key_pair(scheme_id, kCaKeyLengthBits, rng)),
      rng_(rng),
      clock_(std::move(clock)) {
  state_.ledger = revocation::RevocationState(ca_id_);
}

ExternalCaOperator::ExternalCaOperator(std::string ca_id, KeyPair key, Random& rng, Clock clock)
    : ca_id_(std::move(ca_id)), key_(std::move(key)), rng_(rng), clock_(std::move(clock)) {
  state_.ledger = revocation::RevocationState(ca_id_);
}

ExternalCaRequest ExternalCaOperator::certification_request(std::string policy_id) const {
  ExternalCaRequest req;
  req.subject_id = ca_id_;
  req.public_key = key_.public_key;
  req.scheme_id = key_.scheme_id;
  req.key_length_bits = key_.key_length_bits;
  req.policy_id = std::move(policy_id);
  return req;
}

void ExternalCaOperator::install_certificate(Certificate ca_certificate, CertificatePolicy policy) {
  if (ca_certificate.fields.public_key != key_.public_key || ca_certificate.fields.subject_id != ca_id_) {
    throw Error("request-malformed", "certificate does not belong to this CA");
  }
  certificate_ = std::move(ca_certificate);
  policy_ = std::move(policy);
}

Issuance ExternalCaOperator::issue(const IssueRequest& request) {
  if (certificate_.signature.empty()) throw Error("ca-not-certified", ca_id_);
  return issue_into(state_, ca_id_, key_, policy_, request, clock_(), rng_, nullptr);
}

RevocationAck ExternalCaOperator::revoke(std::uint64_t serial, RevocationReason reason, UnixTime at) {
  return revoke_in(state_, ca_id_, serial, reason, at);
}

void ExternalCaOperator::restore_issued(const Certificate& certificate) {
  const std::uint64_t serial = certificate.fields.serial;
  state_.issued.insert_or_assign(serial, certificate);
  if (serial >= state_.next_serial) state_.next_serial = serial + 1;
}

void ExternalCaOperator::restore_revocation(std::uint64_t serial, RevocationEntry entry) {
  state_.ledger.record(serial, entry);
}

}  // namespace eidpki::ca
