#include "eidpki/enrollment/authority.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"
#include "eidpki/toolkit/checkers.hpp"

namespace eidpki::enrollment {

namespace fs = std::filesystem;
using revocation::RevocationReason;

// ---- small value types -------------------------------------------------

std::string_view to_string(ApplicationStatus status) {
  switch (status) {
    case ApplicationStatus::captured: return "captured";
    case ApplicationStatus::verified: return "verified";
    case ApplicationStatus::rejected: return "rejected";
    case ApplicationStatus::issued: return "issued";
  }
  return "captured";
}

ApplicationStatus application_status_from_string(std::string_view name) {
  for (ApplicationStatus s : {ApplicationStatus::captured, ApplicationStatus::verified, ApplicationStatus::rejected,
                              ApplicationStatus::issued}) {
    if (to_string(s) == name) return s;
  }
  throw Error("decode-error", "application status " + std::string(name));
}

void EnrollmentApplication::validate() const {
  if (applicant_id.empty()) throw Error("request-malformed", "applicant_id required");
  for (const char* field : {"name", "birth_date", "nationality"}) {
    auto it = biographic.find(field);
    if (it == biographic.end() || it->second.empty()) {
      throw Error("request-malformed", std::string("biographic field ") + field + " required");
    }
  }
  if (portrait_hash.size() != kHashSize) throw Error("request-malformed", "portrait_hash must be 32 bytes");
  if (fingerprints.empty() || fingerprints.size() > 10) {
    throw Error("request-malformed", "between 1 and 10 fingerprint templates required");
  }
  for (const card::FingerprintTemplate& t : fingerprints) t.validate();
}

void EnrollmentApplication::advance(ApplicationStatus next) {
  const bool ok = (status == ApplicationStatus::captured && next == ApplicationStatus::verified) ||
                  (status == ApplicationStatus::verified && next == ApplicationStatus::issued) ||
                  ((status == ApplicationStatus::captured || status == ApplicationStatus::verified) &&
                   next == ApplicationStatus::rejected);
  if (!ok) {
    throw Error("invalid-transition", std::string(to_string(status)) + " -> " + std::string(to_string(next)));
  }
  status = next;
}

Json EnrollmentApplication::to_json() const {
  Json prints = Json::array();
  for (const card::FingerprintTemplate& t : fingerprints) prints.push_back(to_hex(t.encode()));
  return Json{{"applicant_id", applicant_id},
              {"biographic", biographic},
              {"portrait_hash", to_hex(portrait_hash)},
              {"fingerprints", prints},
              {"status", to_string(status)},
              {"rejection_reason", rejection_reason},
              {"card_id", card_id}};
}

EnrollmentApplication EnrollmentApplication::from_json(const Json& j) {
  EnrollmentApplication a;
  a.applicant_id = j.at("applicant_id").get<std::string>();
  a.biographic = j.at("biographic").get<std::map<std::string, std::string>>();
  a.portrait_hash = from_hex(j.at("portrait_hash").get<std::string>());
  for (const Json& t : j.at("fingerprints")) {
    a.fingerprints.push_back(card::FingerprintTemplate::decode(from_hex(t.get<std::string>())));
  }
  a.status = application_status_from_string(j.at("status").get<std::string>());
  a.rejection_reason = j.value("rejection_reason", "");
  a.card_id = j.value("card_id", "");
  return a;
}

std::string RegistryRecord::rejection_reason() const {
  if (blacklist_hit) return "blacklist-hit";
  if (forensic_match) return "forensic-match";
  return "";
}

Json RegistryRecord::to_json() const {
  return Json{{"applicant_id", applicant_id},
              {"civil_match", civil_match},
              {"forensic_match", forensic_match},
              {"blacklist_hit", blacklist_hit}};
}

RegistryRecord RegistryRecord::from_json(const Json& j) {
  RegistryRecord r;
  r.applicant_id = j.value("applicant_id", "");
  r.civil_match = j.value("civil_match", true);
  r.forensic_match = j.value("forensic_match", false);
  r.blacklist_hit = j.value("blacklist_hit", false);
  return r;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io-error", "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// tmp + rename, optionally fsync'd.
void write_file_atomic(const fs::path& path, std::string_view content, bool durable, mode_t mode = 0644) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, mode);
  if (fd < 0) throw Error("io-error", "cannot write " + tmp.string());
  std::size_t done = 0;
  while (done < content.size()) {
    const ssize_t n = ::write(fd, content.data() + done, content.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw Error("io-error", "write failed for " + tmp.string());
    }
    done += static_cast<std::size_t>(n);
  }
  if (durable) ::fsync(fd);
  ::close(fd);
  fs::rename(tmp, path);
}

}  // namespace

RegistryFixtures RegistryFixtures::load(const fs::path& path) {
  RegistryFixtures out;
  if (!fs::exists(path)) return out;
  try {
    const Json j = Json::parse(read_file(path));
    for (const auto& [applicant, record] : j.items()) {
      RegistryRecord r = RegistryRecord::from_json(record);
      r.applicant_id = applicant;
      out.records_.insert_or_assign(applicant, r);
    }
  } catch (const Json::exception& e) {
    throw Error("request-malformed", std::string("registry fixtures: ") + e.what());
  }
  return out;
}

void RegistryFixtures::save(const fs::path& path) const {
  Json j = Json::object();
  for (const auto& [applicant, record] : records_) {
    Json r = record.to_json();
    r.erase("applicant_id");
    j[applicant] = r;
  }
  write_file_atomic(path, j.dump(2) + "\n", true);
}

void RegistryFixtures::set(RegistryRecord record) {
  const std::string id = record.applicant_id;
  records_.insert_or_assign(id, std::move(record));
}

RegistryRecord RegistryFixtures::lookup(std::string_view applicant_id) const {
  auto it = records_.find(applicant_id);
  if (it != records_.end()) return it->second;
  RegistryRecord r;
  r.applicant_id = std::string(applicant_id);
  return r;
}

std::string_view to_string(CardStatus status) {
  switch (status) {
    case CardStatus::active: return "active";
    case CardStatus::replaced: return "replaced";
    case CardStatus::revoked: return "revoked";
  }
  return "active";
}

namespace {

CardStatus card_status_from_string(std::string_view name) {
  for (CardStatus s : {CardStatus::active, CardStatus::replaced, CardStatus::revoked}) {
    if (to_string(s) == name) return s;
  }
  throw Error("decode-error", "card status " + std::string(name));
}

}  // namespace

Json CardRecord::to_json() const {
  return Json{{"card_id", card_id},         {"applicant_id", applicant_id}, {"issuer_id", issuer_id},
              {"auth_serial", auth_serial}, {"sign_serial", sign_serial},   {"status", to_string(status)},
              {"replaced_by", replaced_by}};
}

CardRecord CardRecord::from_json(const Json& j) {
  CardRecord r;
  r.card_id = j.at("card_id").get<std::string>();
  r.applicant_id = j.at("applicant_id").get<std::string>();
  r.issuer_id = j.at("issuer_id").get<std::string>();
  r.auth_serial = j.at("auth_serial").get<std::uint64_t>();
  r.sign_serial = j.at("sign_serial").get<std::uint64_t>();
  r.status = card_status_from_string(j.at("status").get<std::string>());
  r.replaced_by = j.value("replaced_by", "");
  return r;
}

Json OperatorCredential::to_json() const {
  return Json{{"certificate", certificate.armor()},
              {"public_key", to_hex(key.public_key)},
              {"private_key", to_hex(key.private_key)},
              {"scheme_id", key.scheme_id},
              {"key_length_bits", key.key_length_bits}};
}

OperatorCredential OperatorCredential::from_json(const Json& j) {
  try {
    OperatorCredential c;
    c.certificate = Certificate::from_armor(j.at("certificate").get<std::string>());
    c.key.public_key = from_hex(j.at("public_key").get<std::string>());
    c.key.private_key = from_hex(j.at("private_key").get<std::string>());
    c.key.scheme_id = j.at("scheme_id").get<std::string>();
    c.key.key_length_bits = j.at("key_length_bits").get<std::uint32_t>();
    return c;
  } catch (const Json::exception& e) {
    throw Error("unauthorized", std::string("unreadable credential: ") + e.what());
  }
}

OperatorCredential OperatorCredential::load(const fs::path& path) {
  if (!fs::exists(path)) throw Error("unauthorized", "no credential at " + path.string());
  try {
    return from_json(Json::parse(read_file(path)));
  } catch (const Json::exception& e) {
    throw Error("unauthorized", std::string("unreadable credential: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == "unauthorized") throw;
    throw Error("unauthorized", e.what());
  }
}

void OperatorCredential::save(const fs::path& path) const {
  write_file_atomic(path, to_json().dump(2) + "\n", true, 0600);
}

std::string_view to_string(LifecycleAction action) {
  switch (action) {
    case LifecycleAction::renew: return "renew";
    case LifecycleAction::replace: return "replace";
    case LifecycleAction::revoke: return "revoke";
    case LifecycleAction::unlock: return "unlock";
  }
  return "renew";
}

LifecycleAction lifecycle_action_from_string(std::string_view name) {
  for (LifecycleAction a :
       {LifecycleAction::renew, LifecycleAction::replace, LifecycleAction::revoke, LifecycleAction::unlock}) {
    if (to_string(a) == name) return a;
  }
  throw Error("request-malformed", "lifecycle action " + std::string(name));
}

// ---- authority state ---------------------------------------------------

struct Authority::State {
  ca::Hierarchy hierarchy;
  std::map<std::string, std::unique_ptr<ca::ExternalCaOperator>, std::less<>> externals;
  toolkit::IssuerRegistry registry{hierarchy};
  toolkit::LocalServices local;
  revocation::Hotlist hotlist;
  std::unique_ptr<revocation::TimestampAuthority> tsa;
  Repository repository;
  std::map<std::string, EnrollmentApplication, std::less<>> applications;
  std::map<std::string, CardRecord, std::less<>> cards;

  State(Random& rng, const Clock& clock) : hierarchy(rng, clock), local(registry, clock) {}
};

class Authority::AuditedServices : public toolkit::ValidationServices {
 public:
  explicit AuditedServices(Authority& a) : a_(a) {}

  revocation::OcspResponse ocsp_check(const revocation::OcspRequest& request) override {
    return a_.state_->local.ocsp_check(request);
  }
  revocation::Crl crl_fetch(std::string_view ca_id) override { return a_.state_->local.crl_fetch(ca_id); }
  revocation::Pcl pcl_fetch(std::string_view ca_id) override { return a_.state_->local.pcl_fetch(ca_id); }
  toolkit::SignatureVerification validate_signature(const toolkit::SignatureCheckRequest& request) override {
    return a_.state_->local.validate_signature(request);
  }
  std::optional<Certificate> repo_fetch(std::string_view issuer_id, std::uint64_t serial) override {
    return a_.state_->local.repo_fetch(issuer_id, serial);
  }
  revocation::TimestampToken tsa_stamp(ByteView document_hash) override { return a_.tsa_stamp(document_hash); }

 private:
  Authority& a_;
};

namespace {

Json hex_json(ByteView b) { return to_hex(b); }
Bytes json_hex(const Json& j) { return from_hex(j.get<std::string>()); }

Json policy_effect(const ca::CertificatePolicy& policy) {
  return Json{{"kind", "policy"}, {"policy", hex_json(policy.encode())}};
}

Json entry_json(const revocation::HotlistEntry& e) {
  Json j{{"card_id", e.card_id}, {"mode", to_string(e.block)}, {"since", e.since}};
  if (e.until) j["until"] = *e.until;
  return j;
}

revocation::HotlistEntry entry_from_json(const Json& j) {
  revocation::HotlistEntry e;
  e.card_id = j.at("card_id").get<std::string>();
  e.block = revocation::block_mode_from_string(j.at("mode").get<std::string>());
  e.since = j.at("since").get<UnixTime>();
  if (j.contains("until")) e.until = j.at("until").get<UnixTime>();
  return e;
}

Bytes seed_material(std::string_view seed, std::uint64_t version, std::string_view salt) {
  Bytes m = to_bytes(seed);
  append_u64(m, version);
  append(m, length_prefixed(to_bytes(salt)));
  return sha256(m);
}

std::string external_context(std::string_view ca_id) { return "external:" + std::string(ca_id); }

}  // namespace

Authority::Authority(AuthorityOptions options) : options_(std::move(options)) {
  clock_ = options_.clock ? options_.clock : system_clock();
}

Authority::~Authority() {
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

std::unique_ptr<Authority> Authority::open(AuthorityOptions options) {
  if (options.home.empty()) throw Error("usage", "no home directory (set --home or EIDPKI_HOME)");
  std::unique_ptr<Authority> a(new Authority(std::move(options)));
  const fs::path home = a->options_.home;
  const fs::path secrets_path = home / "secrets";

  std::vector<AuditEvent> events;
  if (a->options_.read_only) {
    events = read_audit_events(a->audit_path());
  } else {
    fs::create_directories(home);
    a->lock_fd_ = ::open((home / "lock").c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0600);
    if (a->lock_fd_ < 0) throw Error("io-error", "cannot open lock file in " + home.string());
    if (::flock(a->lock_fd_, LOCK_EX | LOCK_NB) != 0) {
      throw Error("home-locked", home.string() + " is held by another writer (a running server?)");
    }
    a->log_.emplace(AuditLog::open(a->audit_path(), &events));
  }
  a->version_ = events.empty() ? 0 : events.back().sequence;

  if (a->options_.seed) {
    a->rng_ = std::make_unique<Random>(seed_material(*a->options_.seed, a->version_, a->options_.salt));
  } else {
    a->rng_ = std::make_unique<Random>();
  }

  if (fs::exists(secrets_path)) {
    try {
      const Json j = Json::parse(read_file(secrets_path));
      a->secrets_ = Secrets{json_hex(j.at("seal_key")), json_hex(j.at("sm_master")), json_hex(j.at("card_seal"))};
    } catch (const Json::exception& e) {
      throw Error("state-corrupt", std::string("secrets: ") + e.what());
    }
  } else if (!a->options_.read_only) {
    std::unique_ptr<Random> source = a->options_.seed
                                         ? std::make_unique<Random>(seed_material(*a->options_.seed, 0, "secrets"))
                                         : std::make_unique<Random>();
    a->secrets_ = Secrets{source->bytes(kSymmetricKeySize), source->bytes(kSymmetricKeySize),
                          source->bytes(kSymmetricKeySize)};
    const Json j{{"seal_key", to_hex(a->secrets_.seal_key)},
                 {"sm_master", to_hex(a->secrets_.sm_master)},
                 {"card_seal", to_hex(a->secrets_.card_seal)}};
    write_file_atomic(secrets_path, j.dump() + "\n", true, 0600);
  } else if (!events.empty()) {
    throw Error("state-corrupt", "audit log present but secrets missing");
  }

  a->services_ = std::make_unique<AuditedServices>(*a);
  a->load(events);
  if (!a->options_.read_only) a->sync_derived(events);
  return a;
}

void Authority::load(const std::vector<AuditEvent>& events) {
  state_ = std::make_unique<State>(*rng_, clock_);
  for (const AuditEvent& e : events) {
    try {
      for (const Json& effect : e.payload.at("effects")) apply(effect);
    } catch (const Json::exception& ex) {
      throw Error("audit-corrupt", "event " + std::to_string(e.sequence) + ": " + ex.what());
    }
  }
}

void Authority::apply(const Json& effect) {
  State& s = *state_;
  const std::string kind = effect.at("kind").get<std::string>();
  if (kind == "policy") {
    s.hierarchy.add_policy(ca::CertificatePolicy::decode(json_hex(effect.at("policy"))));
  } else if (kind == "ca") {
    const ca::CertificationAuthority authority = ca::CertificationAuthority::decode(json_hex(effect.at("authority")));
    std::optional<ca::KeyContainer> container;
    if (effect.contains("container")) {
      container = ca::open_container(json_hex(effect.at("container")), secrets_.seal_key);
    }
    s.hierarchy.restore_ca(authority, std::move(container));
    s.repository.store(authority.ca_certificate);
  } else if (kind == "external") {
    const std::string ca_id = effect.at("ca_id").get<std::string>();
    KeyPair key = ca::open_key_pair(json_hex(effect.at("key")), secrets_.seal_key, external_context(ca_id));
    auto op = std::make_unique<ca::ExternalCaOperator>(ca_id, std::move(key), *rng_, clock_);
    op->install_certificate(Certificate::from_armor(effect.at("certificate").get<std::string>()),
                            s.hierarchy.policy(effect.at("policy_id").get<std::string>()));
    s.registry.add_external(*op);
    s.externals[ca_id] = std::move(op);
  } else if (kind == "issue") {
    const std::string ca_id = effect.at("ca").get<std::string>();
    const Certificate cert = Certificate::from_armor(effect.at("certificate").get<std::string>());
    if (auto it = s.externals.find(ca_id); it != s.externals.end()) {
      it->second->restore_issued(cert);
    } else {
      std::optional<ca::EscrowRecord> escrow;
      if (effect.contains("escrow")) escrow = ca::EscrowRecord::decode(json_hex(effect.at("escrow")));
      s.hierarchy.restore_issued(ca_id, cert, std::move(escrow));
    }
    s.repository.store(cert);
  } else if (kind == "revoke") {
    const std::string ca_id = effect.at("ca").get<std::string>();
    const revocation::RevocationEntry entry{
        revocation::reason_from_string(effect.at("reason").get<std::string>()), effect.at("at").get<UnixTime>()};
    const std::uint64_t serial = effect.at("serial").get<std::uint64_t>();
    if (auto it = s.externals.find(ca_id); it != s.externals.end()) {
      it->second->restore_revocation(serial, entry);
    } else {
      s.hierarchy.restore_revocation(ca_id, serial, entry);
    }
  } else if (kind == "status") {
    s.hierarchy.set_status(effect.at("ca").get<std::string>(),
                           effect.at("status").get<std::string>() == "suspended" ? ca::CaStatus::suspended
                                                                                 : ca::CaStatus::active);
  } else if (kind == "recovery") {
    s.hierarchy.restore_recovery(ca::RecoveryEvent{effect.at("ca").get<std::string>(),
                                                   effect.at("serial").get<std::uint64_t>(),
                                                   effect.at("operator").get<std::string>(),
                                                   effect.at("at").get<UnixTime>()});
  } else if (kind == "application") {
    EnrollmentApplication app = EnrollmentApplication::from_json(effect.at("application"));
    const std::string id = app.applicant_id;
    s.applications.insert_or_assign(id, std::move(app));
  } else if (kind == "card" || kind == "card_status") {
    CardRecord record = CardRecord::from_json(effect.at("record"));
    const std::string id = record.card_id;
    s.cards.insert_or_assign(id, std::move(record));
  } else if (kind == "card_blob") {
    // physical card contents only; nothing held in memory
  } else if (kind == "block") {
    s.hotlist.restore(entry_from_json(effect.at("entry")));
  } else if (kind == "unblock") {
    s.hotlist.unblock(effect.at("card_id").get<std::string>());
  } else if (kind == "tsa_setup") {
    KeyPair key = ca::open_key_pair(json_hex(effect.at("key")), secrets_.seal_key, "tsa");
    s.tsa = std::make_unique<revocation::TimestampAuthority>(
        Certificate::from_armor(effect.at("certificate").get<std::string>()), std::move(key));
  } else if (kind == "tsa") {
    if (!s.tsa) throw Error("audit-corrupt", "time-stamp before TSA setup");
    s.tsa->restore(effect.at("serial").get<std::uint64_t>(), effect.at("time").get<UnixTime>());
  } else {
    throw Error("audit-corrupt", "unknown effect " + kind);
  }
}

void Authority::write_derived(const Json& effect) {
  const std::string kind = effect.at("kind").get<std::string>();
  const fs::path home = options_.home;
  if (kind == "ca") {
    const ca::CertificationAuthority authority = ca::CertificationAuthority::decode(json_hex(effect.at("authority")));
    const Json meta{{"ca_id", authority.ca_id},
                    {"kind", ca::to_string(authority.kind)},
                    {"policy_id", authority.policy_id},
                    {"parent", authority.parent_ca_id.value_or("")},
                    {"certificate", authority.ca_certificate.armor()}};
    write_file_atomic(home / "ca" / authority.ca_id / "meta", meta.dump(2) + "\n", false);
  } else if (kind == "issue") {
    const std::string ca_id = effect.at("ca").get<std::string>();
    const Certificate cert = Certificate::from_armor(effect.at("certificate").get<std::string>());
    const std::string serial = std::to_string(cert.fields.serial);
    write_file_atomic(home / "ca" / ca_id / "issued" / serial, cert.armor() + "\n", false);
    if (effect.contains("escrow")) {
      write_file_atomic(home / "ca" / ca_id / "escrow" / serial, effect.at("escrow").get<std::string>() + "\n", false,
                        0600);
    }
  } else if (kind == "card" || kind == "card_blob") {
    const std::string card_id =
        kind == "card" ? effect.at("record").at("card_id").get<std::string>() : effect.at("card_id").get<std::string>();
    write_file_atomic(card_path(card_id), effect.at("blob").get<std::string>() + "\n", true, 0600);
  }
}

void Authority::sync_derived(const std::vector<AuditEvent>& events) {
  const fs::path marker = options_.home / "derived.seq";
  std::uint64_t done = 0;
  if (fs::exists(marker)) {
    try {
      done = std::stoull(read_file(marker));
    } catch (const std::exception&) {
      done = 0;
    }
  }
  bool wrote = false;
  for (const AuditEvent& e : events) {
    if (e.sequence <= done) continue;
    for (const Json& effect : e.payload.at("effects")) write_derived(effect);
    wrote = true;
  }
  if (wrote || done > version_) write_file_atomic(marker, std::to_string(version_) + "\n", false);
}

void Authority::commit(std::string action, std::string subject, Json effects) {
  Json payload{{"effects", std::move(effects)}};
  const AuditEvent e = log_->append(clock_(), options_.actor, std::move(action), std::move(subject), payload);
  version_ = e.sequence;
  try {
    for (const Json& effect : e.payload.at("effects")) write_derived(effect);
    write_file_atomic(options_.home / "derived.seq", std::to_string(version_) + "\n", false);
  } catch (const std::exception&) {
    // derived files are rebuilt from the log on the next open
  }
}

void Authority::require_writable() const {
  if (!log_) throw Error("read-only", "state opened read-only");
}

template <typename Fn>
decltype(auto) Authority::mutate(Fn&& fn) {
  require_writable();
  try {
    return fn();
  } catch (...) {
    // Drop whatever the failed operation changed in memory.
    load(read_audit_events(audit_path()));
    throw;
  }
}

// ---- CA setup ----------------------------------------------------------

namespace {

Json ca_effect(const ca::Hierarchy& h, const ca::CertificationAuthority& authority, ByteView seal_key, Random& rng) {
  Json e{{"kind", "ca"}, {"authority", hex_json(authority.encode())}};
  if (authority.holds_local_keys()) {
    e["container"] = hex_json(ca::seal_container(h.key_store().at(authority.key_container_id), seal_key, rng));
  }
  return e;
}

}  // namespace

const ca::CertificationAuthority& Authority::init_root(const ca::CaConfig& config) {
  return mutate([&]() -> const ca::CertificationAuthority& {
    State& s = *state_;
    Json effects = Json::array({policy_effect(config.policy)});
    const ca::CertificationAuthority& root = s.hierarchy.init_root_ca(config);
    effects.push_back(ca_effect(s.hierarchy, root, secrets_.seal_key, *rng_));
    s.repository.store(root.ca_certificate);
    commit("ca.init-root", root.ca_id, std::move(effects));
    return s.hierarchy.ca(config.ca_id);
  });
}

const ca::CertificationAuthority& Authority::init_population(std::string_view root_id, const ca::CaConfig& config) {
  return mutate([&]() -> const ca::CertificationAuthority& {
    State& s = *state_;
    Json effects = Json::array({policy_effect(config.policy)});
    const ca::CertificationAuthority& pop = s.hierarchy.init_population_ca(root_id, config);
    effects.push_back(ca_effect(s.hierarchy, pop, secrets_.seal_key, *rng_));
    s.repository.store(pop.ca_certificate);
    commit("ca.init-population", pop.ca_id, std::move(effects));
    return s.hierarchy.ca(config.ca_id);
  });
}

const ca::CertificationAuthority& Authority::provision_virtual(std::string_view population_id,
                                                               const ca::CaConfig& config) {
  return mutate([&]() -> const ca::CertificationAuthority& {
    State& s = *state_;
    Json effects = Json::array({policy_effect(config.policy)});
    const ca::CertificationAuthority& sub = s.hierarchy.provision_virtual_sub_ca(population_id, config);
    effects.push_back(ca_effect(s.hierarchy, sub, secrets_.seal_key, *rng_));
    s.repository.store(sub.ca_certificate);
    commit("ca.provision-sub", sub.ca_id, std::move(effects));
    return s.hierarchy.ca(config.ca_id);
  });
}

Certificate Authority::certify_external(std::string_view root_id, std::string_view ca_id,
                                        const ca::CertificatePolicy& policy) {
  return mutate([&] {
    State& s = *state_;
    if (s.externals.count(ca_id)) throw Error("id-conflict", std::string(ca_id));
    policy.validate();
    Json effects = Json::array({policy_effect(policy)});
    s.hierarchy.add_policy(policy);
    auto op = std::make_unique<ca::ExternalCaOperator>(std::string(ca_id), std::string(kEd25519Scheme), *rng_, clock_);
    Certificate cert = s.hierarchy.certify_external_sub_ca(root_id, op->certification_request(policy.policy_id));
    op->install_certificate(cert, policy);
    effects.push_back(ca_effect(s.hierarchy, s.hierarchy.ca(ca_id), secrets_.seal_key, *rng_));
    effects.push_back(Json{{"kind", "external"},
                           {"ca_id", std::string(ca_id)},
                           {"key", hex_json(ca::seal_key_pair(op->key(), secrets_.seal_key, external_context(ca_id),
                                                              *rng_))},
                           {"certificate", cert.armor()},
                           {"policy_id", policy.policy_id}});
    s.repository.store(cert);
    s.registry.add_external(*op);
    s.externals[std::string(ca_id)] = std::move(op);
    commit("ca.certify-sub", std::string(ca_id), std::move(effects));
    return cert;
  });
}

ca::Issuance Authority::issue_from(std::string_view ca_id, const ca::IssueRequest& request, Json& effects) {
  State& s = *state_;
  ca::Issuance issuance;
  if (auto it = s.externals.find(ca_id); it != s.externals.end()) {
    issuance = it->second->issue(request);
  } else {
    issuance = s.hierarchy.issue_end_entity(ca_id, request);
  }
  s.repository.store(issuance.certificate);
  Json e{{"kind", "issue"}, {"ca", std::string(ca_id)}, {"certificate", issuance.certificate.armor()}};
  if (issuance.escrow) e["escrow"] = hex_json(issuance.escrow->encode());
  effects.push_back(std::move(e));
  return issuance;
}

void Authority::revoke_into(std::string_view ca_id, std::uint64_t serial, RevocationReason reason, Json& effects) {
  State& s = *state_;
  ca::RevocationAck ack;
  if (auto it = s.externals.find(ca_id); it != s.externals.end()) {
    ack = it->second->revoke(serial, reason, clock_());
  } else {
    ack = s.hierarchy.revoke_certificate(ca_id, serial, reason, clock_());
  }
  if (ack.newly_recorded) {
    effects.push_back(Json{{"kind", "revoke"},
                           {"ca", std::string(ca_id)},
                           {"serial", serial},
                           {"reason", revocation::to_string(ack.entry.reason)},
                           {"at", ack.entry.revoked_at}});
  }
}

const KeyPair& Authority::issuer_signing_key(std::string_view ca_id) const {
  if (auto it = state_->externals.find(ca_id); it != state_->externals.end()) return it->second->key();
  return state_->hierarchy.signing_key(ca_id);
}

IssuerKey Authority::issuer_public_key(std::string_view ca_id) const {
  if (auto it = state_->externals.find(ca_id); it != state_->externals.end()) return it->second->issuer_key();
  return state_->hierarchy.ca(ca_id).issuer_key();
}

OperatorCredential Authority::issue_operator(std::string_view operator_id, int validity_days) {
  if (operator_id.empty()) throw Error("request-malformed", "operator id required");
  return mutate([&] {
    const ca::CertificationAuthority* root = state_->hierarchy.root();
    if (!root) throw Error("unknown-ca", "no root CA");
    OperatorCredential cred;
    cred.key = generate_key_pair(kEd25519Scheme, kUserKeyLengthBits, *rng_);
    ca::IssueRequest req;
    req.subject_id = std::string(kOperatorSubjectPrefix) + std::string(operator_id);
    req.profile = Profile::device;
    req.public_key = cred.key.public_key;
    req.validity_days = validity_days;
    Json effects = Json::array();
    cred.certificate = issue_from(root->ca_id, req, effects).certificate;
    commit("ca.operator", req.subject_id, std::move(effects));
    return cred;
  });
}

void Authority::setup_tsa(std::string_view root_id, std::string_view tsa_id) {
  mutate([&] {
    State& s = *state_;
    if (s.tsa) throw Error("tsa-exists", s.tsa->certificate().fields.subject_id);
    KeyPair key = generate_key_pair(kEd25519Scheme, kUserKeyLengthBits, *rng_);
    ca::IssueRequest req;
    req.subject_id = std::string(tsa_id);
    req.profile = Profile::device;
    req.public_key = key.public_key;
    req.validity_days = std::min(3650, s.hierarchy.policy(s.hierarchy.ca(root_id).policy_id).max_validity_days);
    Json effects = Json::array();
    const Certificate cert = issue_from(root_id, req, effects).certificate;
    effects.push_back(Json{{"kind", "tsa_setup"},
                           {"certificate", cert.armor()},
                           {"key", hex_json(ca::seal_key_pair(key, secrets_.seal_key, "tsa", *rng_))}});
    s.tsa = std::make_unique<revocation::TimestampAuthority>(cert, std::move(key));
    commit("tsa.setup", std::string(tsa_id), std::move(effects));
  });
}

// ---- enrollment and lifecycle -----------------------------------------

namespace {

inline constexpr int kCardCertificateDays = 1825;

std::string next_card_id(std::size_t existing) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "card-%06zu", existing + 1);
  return buf;
}

}  // namespace

CardRecord Authority::personalize_card(EnrollmentApplication& application, std::string_view issuer_id,
                                       std::string_view pin, std::vector<Certificate>& issued, Json& effects) {
  State& s = *state_;
  const std::string card_id = next_card_id(s.cards.size());

  card::Personalization p;
  p.card_id = card_id;
  p.auth_pair = generate_key_pair(kEd25519Scheme, kUserKeyLengthBits, *rng_);
  p.sign_pair = generate_key_pair(kEd25519Scheme, kUserKeyLengthBits, *rng_);
  auto request = [&](Profile profile, const KeyPair& key) {
    ca::IssueRequest r;
    r.subject_id = application.applicant_id;
    r.profile = profile;
    r.public_key = key.public_key;
    r.validity_days = kCardCertificateDays;
    return r;
  };
  p.auth_certificate = issue_from(issuer_id, request(Profile::identity_auth, p.auth_pair), effects).certificate;
  p.sign_certificate = issue_from(issuer_id, request(Profile::signature, p.sign_pair), effects).certificate;
  issued.push_back(p.auth_certificate);
  issued.push_back(p.sign_certificate);

  const KeyPair& issuer_key = issuer_signing_key(issuer_id);
  p.files.push_back(card::sign_public_file("biographic", encode_string_map(application.biographic),
                                           std::string(issuer_id), issuer_key));
  p.files.push_back(card::sign_public_file(
      "portrait", encode_string_map({{"portrait_hash", to_hex(application.portrait_hash)}}), std::string(issuer_id),
      issuer_key));
  p.pin = std::string(pin);
  p.fingerprint = application.fingerprints.front();
  p.sm_master_key_label = std::string(kSmKeyLabel);
  p.sm_master_key = secrets_.sm_master;
  p.unblock_authority = issuer_public_key(issuer_id);

  const std::unique_ptr<card::Card> chip = card::Card::personalize(std::move(p), *rng_);
  const Bytes blob = chip->serialize(secrets_.card_seal, *rng_);

  CardRecord record{card_id,
                    application.applicant_id,
                    std::string(issuer_id),
                    chip->auth_certificate_serial(),
                    chip->sign_certificate_serial(),
                    CardStatus::active,
                    ""};
  s.cards[card_id] = record;
  effects.push_back(Json{{"kind", "card"}, {"record", record.to_json()}, {"blob", to_hex(blob)}});
  return record;
}

EnrollResult Authority::enroll(EnrollmentApplication application, const RegistryRecord& registry,
                               std::string_view issuer_id, std::string_view pin) {
  require_writable();
  application.validate();
  card::check_pin_format(pin);
  if (application.status != ApplicationStatus::captured) {
    throw Error("invalid-transition", "enrollment starts from a captured application");
  }
  if (auto it = state_->applications.find(application.applicant_id);
      it != state_->applications.end() && it->second.status == ApplicationStatus::issued) {
    throw Error("already-issued", application.applicant_id + " holds " + it->second.card_id);
  }
  return mutate([&] {
    State& s = *state_;
    EnrollResult result;
    Json effects = Json::array();
    if (!registry.clears()) {
      application.advance(ApplicationStatus::rejected);
      application.rejection_reason = registry.rejection_reason();
    } else {
      application.advance(ApplicationStatus::verified);
      result.card = personalize_card(application, issuer_id, pin, result.certificates, effects);
      application.advance(ApplicationStatus::issued);
      application.card_id = result.card->card_id;
    }
    effects.push_back(
        Json{{"kind", "application"}, {"application", application.to_json()}, {"registry", registry.to_json()}});
    s.applications.insert_or_assign(application.applicant_id, application);
    commit("enroll", application.applicant_id, std::move(effects));
    result.application = application;
    return result;
  });
}

void Authority::require_operator(const OperatorCredential& credential) {
  const State& s = *state_;
  const Certificate& c = credential.certificate;
  const ca::CertificationAuthority* root = s.hierarchy.root();
  bool ok = root != nullptr && c.fields.profile == Profile::device && c.fields.issuer_id == root->ca_id &&
            c.fields.subject_id.rfind(kOperatorSubjectPrefix, 0) == 0 &&
            c.fields.public_key == credential.key.public_key;
  if (ok) {
    const PathBuildResult built = build_certificate_path(c, s.registry, s.registry.anchors());
    toolkit::LedgerChecker checker(s.registry);
    ok = built.path && validate_certificate_path(*built.path, s.registry.anchors(), checker, clock_()).verdict ==
                           Verdict::valid;
  }
  if (ok) {
    // proof of possession of the credential key
    const Bytes challenge = rng_->bytes(32);
    try {
      ok = verify_message(c.fields.scheme_id, c.fields.public_key, challenge, sign_message(credential.key, challenge));
    } catch (const Error&) {
      ok = false;
    }
  }
  if (!ok) throw Error("unauthorized", "operator credential does not verify");
}

LifecycleResult Authority::lifecycle(std::string_view card_id, LifecycleAction action,
                                     const OperatorCredential& credential, std::string_view new_pin) {
  require_writable();
  require_operator(credential);
  auto found = state_->cards.find(card_id);
  if (found == state_->cards.end()) throw Error("unknown-card", std::string(card_id));
  if (action == LifecycleAction::replace || action == LifecycleAction::unlock) card::check_pin_format(new_pin);
  if (action != LifecycleAction::revoke && found->second.status != CardStatus::active) {
    throw Error("card-inactive", std::string(card_id) + " is " + std::string(to_string(found->second.status)));
  }

  return mutate([&] {
    State& s = *state_;
    CardRecord record = s.cards.find(card_id)->second;
    LifecycleResult result;
    result.card_id = record.card_id;
    result.action = action;
    Json effects = Json::array();
    auto revoke_pair = [&](RevocationReason reason) {
      for (std::uint64_t serial : {record.auth_serial, record.sign_serial}) {
        const std::size_t before = effects.size();
        revoke_into(record.issuer_id, serial, reason, effects);
        if (effects.size() != before) result.revoked_serials.push_back(serial);
      }
    };
    auto hotlist = [&] {
      const revocation::HotlistEntry entry =
          s.hotlist.block(record.card_id, revocation::BlockMode::permanent, clock_(), std::nullopt);
      effects.push_back(Json{{"kind", "block"}, {"entry", entry_json(entry)}});
    };

    switch (action) {
      case LifecycleAction::renew: {
        const std::optional<Certificate> old_auth = s.registry.find(record.issuer_id, record.auth_serial);
        const std::optional<Certificate> old_sign = s.registry.find(record.issuer_id, record.sign_serial);
        if (!old_auth || !old_sign) throw Error("unknown-serial", "card certificates missing");
        auto renewal = [&](const Certificate& old) {
          ca::IssueRequest r;
          r.subject_id = old.fields.subject_id;
          r.profile = old.fields.profile;
          r.public_key = old.fields.public_key;
          r.scheme_id = old.fields.scheme_id;
          r.key_length_bits = old.fields.key_length_bits;
          r.validity_days = kCardCertificateDays;
          return issue_from(record.issuer_id, r, effects).certificate;
        };
        const Certificate auth = renewal(*old_auth);
        const Certificate sign = renewal(*old_sign);
        result.issued = {auth, sign};
        revoke_pair(RevocationReason::superseded);
        const std::unique_ptr<card::Card> chip = load_card(card_id);
        chip->install_certificates(auth, sign);
        effects.push_back(Json{{"kind", "card_blob"},
                               {"card_id", record.card_id},
                               {"blob", to_hex(chip->serialize(secrets_.card_seal, *rng_))}});
        record.auth_serial = auth.fields.serial;
        record.sign_serial = sign.fields.serial;
        break;
      }
      case LifecycleAction::replace: {
        revoke_pair(RevocationReason::card_lost);
        hotlist();
        EnrollmentApplication application = s.applications.at(record.applicant_id);
        const CardRecord fresh = personalize_card(application, record.issuer_id, new_pin, result.issued, effects);
        application.card_id = fresh.card_id;
        effects.push_back(Json{{"kind", "application"}, {"application", application.to_json()}});
        s.applications.insert_or_assign(application.applicant_id, application);
        record.status = CardStatus::replaced;
        record.replaced_by = fresh.card_id;
        result.new_card = fresh;
        break;
      }
      case LifecycleAction::revoke: {
        revoke_pair(RevocationReason::administrative);
        hotlist();
        record.status = CardStatus::revoked;
        break;
      }
      case LifecycleAction::unlock: {
        const std::unique_ptr<card::Card> chip = load_card(card_id);
        {
          const card::Sam terminal = sam();
          card::SecureChannel channel = card::SecureChannel::open(*chip, terminal, card::Applet::pki);
          const Bytes admin = sign_message(issuer_signing_key(record.issuer_id), card::unblock_message(record.card_id));
          card::unblock_pin(channel, admin, new_pin);
          channel.close();
        }
        effects.push_back(Json{{"kind", "card_blob"},
                               {"card_id", record.card_id},
                               {"blob", to_hex(chip->serialize(secrets_.card_seal, *rng_))}});
        break;
      }
    }
    effects.push_back(Json{{"kind", "card_status"}, {"record", record.to_json()}});
    s.cards.insert_or_assign(record.card_id, record);
    commit("lifecycle." + std::string(to_string(action)), record.card_id, std::move(effects));
    return result;
  });
}

// ---- direct CA operations ----------------------------------------------

ca::Issuance Authority::issue_certificate(std::string_view ca_id, const ca::IssueRequest& request) {
  return mutate([&] {
    Json effects = Json::array();
    ca::Issuance issuance = issue_from(ca_id, request, effects);
    commit("cert.issue", request.subject_id, std::move(effects));
    return issuance;
  });
}

ca::RevocationAck Authority::revoke(std::string_view ca_id, std::uint64_t serial, RevocationReason reason) {
  return mutate([&] {
    Json effects = Json::array();
    revoke_into(ca_id, serial, reason, effects);
    ca::RevocationAck ack;
    ack.ca_id = std::string(ca_id);
    ack.serial = serial;
    ack.newly_recorded = !effects.empty();
    const revocation::RevocationState& ledger = *state_->registry.issuer(ca_id).ledger;
    if (const revocation::RevocationEntry* entry = ledger.find(serial)) ack.entry = *entry;
    commit("revoke", std::string(ca_id) + "#" + std::to_string(serial), std::move(effects));
    return ack;
  });
}

KeyPair Authority::recover_escrowed_key(std::string_view ca_id, std::uint64_t serial,
                                        const OperatorCredential& credential) {
  require_writable();
  require_operator(credential);
  return mutate([&] {
    const std::string op = credential.certificate.fields.subject_id;
    KeyPair key = state_->hierarchy.recover_escrowed_key(ca_id, serial, op);
    const ca::RecoveryEvent& event = state_->hierarchy.recoveries().back();
    Json effects = Json::array({Json{{"kind", "recovery"},
                                     {"ca", event.ca_id},
                                     {"serial", event.serial},
                                     {"operator", event.operator_id},
                                     {"at", event.at}}});
    commit("escrow.recover", std::string(ca_id) + "#" + std::to_string(serial), std::move(effects));
    return key;
  });
}

// ---- gateway and time-stamping -----------------------------------------

revocation::HotlistEntry Authority::gateway_block(std::string_view card_id, revocation::BlockMode mode,
                                                  std::optional<UnixTime> until) {
  return mutate([&] {
    const revocation::HotlistEntry entry = state_->hotlist.block(card_id, mode, clock_(), until);
    commit("gateway.block", std::string(card_id),
           Json::array({Json{{"kind", "block"}, {"entry", entry_json(entry)}}}));
    return entry;
  });
}

std::optional<revocation::HotlistEntry> Authority::gateway_unblock(std::string_view card_id) {
  return mutate([&] {
    std::optional<revocation::HotlistEntry> removed = state_->hotlist.unblock(card_id);
    commit("gateway.unblock", std::string(card_id),
           Json::array({Json{{"kind", "unblock"}, {"card_id", std::string(card_id)}}}));
    return removed;
  });
}

revocation::GatewayDecision Authority::gateway_check(std::string_view card_id) const {
  return state_->hotlist.check(card_id, clock_());
}

revocation::TimestampToken Authority::tsa_stamp(ByteView document_hash) {
  if (!state_->tsa) throw Error("validation-unavailable", "no time-stamping authority configured");
  return mutate([&] {
    revocation::TimestampToken token = state_->tsa->issue(document_hash, clock_());
    commit("tsa.stamp", token.tsa_id,
           Json::array({Json{{"kind", "tsa"}, {"serial", token.serial}, {"time", token.time}}}));
    return token;
  });
}

toolkit::ValidationServices& Authority::services() { return *services_; }

// ---- views -------------------------------------------------------------

std::uint64_t Authority::version() const { return version_; }
const ca::Hierarchy& Authority::hierarchy() const { return state_->hierarchy; }
const toolkit::IssuerRegistry& Authority::registry() const { return state_->registry; }
const Repository& Authority::repository() const { return state_->repository; }
const revocation::Hotlist& Authority::hotlist() const { return state_->hotlist; }
const revocation::TimestampAuthority* Authority::tsa() const { return state_->tsa.get(); }

const std::map<std::string, EnrollmentApplication, std::less<>>& Authority::applications() const {
  return state_->applications;
}

const std::map<std::string, CardRecord, std::less<>>& Authority::cards() const { return state_->cards; }

const CardRecord& Authority::card_record(std::string_view card_id) const {
  auto it = state_->cards.find(card_id);
  if (it == state_->cards.end()) throw Error("unknown-card", std::string(card_id));
  return it->second;
}

TrustAnchorSet Authority::anchors() const { return state_->hierarchy.anchors(); }

card::Sam Authority::sam() const {
  return card::Sam("authority-sam", std::map<std::string, Bytes, std::less<>>{{std::string(kSmKeyLabel),
                                                                                secrets_.sm_master}});
}

fs::path Authority::card_path(std::string_view card_id) const {
  if (card_id.empty() || card_id.find('/') != std::string_view::npos || card_id.find("..") != std::string_view::npos) {
    throw Error("unknown-card", std::string(card_id));
  }
  return options_.home / "cards" / std::string(card_id);
}

std::unique_ptr<card::Card> Authority::load_card(std::string_view card_id) {
  const fs::path path = card_path(card_id);
  if (!fs::exists(path)) throw Error("unknown-card", std::string(card_id));
  std::string hex = read_file(path);
  while (!hex.empty() && (hex.back() == '\n' || hex.back() == '\r')) hex.pop_back();
  return card::Card::deserialize(from_hex(hex), secrets_.card_seal, *rng_);
}

void Authority::save_card(const card::Card& chip) {
  write_file_atomic(card_path(chip.card_id()), to_hex(chip.serialize(secrets_.card_seal, *rng_)) + "\n", true, 0600);
}

}  // namespace eidpki::enrollment
