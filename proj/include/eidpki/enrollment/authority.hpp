#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eidpki/ca/hierarchy.hpp"
#include "eidpki/card/card.hpp"
#include "eidpki/card/terminal.hpp"
#include "eidpki/enrollment/audit_log.hpp"
#include "eidpki/enrollment/repository.hpp"
#include "eidpki/revocation/hotlist.hpp"
#include "eidpki/revocation/timestamp.hpp"
#include "eidpki/toolkit/services.hpp"

namespace eidpki::enrollment {

enum class ApplicationStatus { captured, verified, rejected, issued };
std::string_view to_string(ApplicationStatus status);
ApplicationStatus application_status_from_string(std::string_view name);

struct EnrollmentApplication {
  std::string applicant_id;
  std::map<std::string, std::string> biographic;  // name, birth_date, nationality
  Bytes portrait_hash;
  std::vector<card::FingerprintTemplate> fingerprints;
  ApplicationStatus status = ApplicationStatus::captured;
  std::string rejection_reason;
  std::string card_id;

  // Throws Error("request-malformed").
  void validate() const;
  // captured -> verified -> issued, captured|verified -> rejected.
  // Throws Error("invalid-transition").
  void advance(ApplicationStatus next);

  Json to_json() const;
  static EnrollmentApplication from_json(const Json& j);
};

struct RegistryRecord {
  std::string applicant_id;
  bool civil_match = true;
  bool forensic_match = false;
  bool blacklist_hit = false;

  bool clears() const { return !blacklist_hit && !forensic_match; }
  std::string rejection_reason() const;

  Json to_json() const;
  static RegistryRecord from_json(const Json& j);
};

// Seed table for the civil / forensic / blacklist checks, stored as JSON at
// registry/fixtures. Applicants without an entry clear.
class RegistryFixtures {
 public:
  static RegistryFixtures load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void set(RegistryRecord record);
  RegistryRecord lookup(std::string_view applicant_id) const;

 private:
  std::map<std::string, RegistryRecord, std::less<>> records_;
};

enum class CardStatus { active, replaced, revoked };
std::string_view to_string(CardStatus status);

struct CardRecord {
  std::string card_id;
  std::string applicant_id;
  std::string issuer_id;
  std::uint64_t auth_serial = 0;
  std::uint64_t sign_serial = 0;
  CardStatus status = CardStatus::active;
  std::string replaced_by;

  Json to_json() const;
  static CardRecord from_json(const Json& j);
};

// Device certificate issued by the root plus its private key, as handed to
// a helpdesk operator.
struct OperatorCredential {
  Certificate certificate;
  KeyPair key;

  Json to_json() const;
  static OperatorCredential from_json(const Json& j);
  static OperatorCredential load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

inline constexpr std::string_view kOperatorSubjectPrefix = "operator/";
inline constexpr std::string_view kSmKeyLabel = "sm-master";

enum class LifecycleAction { renew, replace, revoke, unlock };
std::string_view to_string(LifecycleAction action);
LifecycleAction lifecycle_action_from_string(std::string_view name);

struct EnrollResult {
  EnrollmentApplication application;
  std::optional<CardRecord> card;
  std::vector<Certificate> certificates;
};

struct LifecycleResult {
  std::string card_id;
  LifecycleAction action = LifecycleAction::renew;
  std::vector<std::uint64_t> revoked_serials;
  std::vector<Certificate> issued;
  std::optional<CardRecord> new_card;
};

struct AuthorityOptions {
  std::filesystem::path home;
  Clock clock;                      // defaults to the system clock
  std::optional<std::string> seed;  // deterministic randomness
  std::string salt;                 // mixed into the seeded stream
  bool read_only = false;
  std::string actor = "cli";
};

struct Secrets {
  Bytes seal_key;   // key containers and sealed key pairs
  Bytes sm_master;  // secure-messaging master key
  Bytes card_seal;  // emulated cards at rest
};

// The central authority: CA hierarchy, Option-1 operators, time-stamping,
// card-validation gateway, repository and enrollment records. Every mutation
// is committed to the audit log as one event before it is acknowledged; the
// in-memory state is rebuilt from that log on open and after a failed
// operation. Files under ca/ and cards/ are derived from the log.
//
// Not internally synchronized. The server serializes mutations.
class Authority {
 public:
  // Throws Error("home-locked") if another writer holds the home directory
  // and Error("audit-corrupt") for a log that does not verify.
  static std::unique_ptr<Authority> open(AuthorityOptions options);
  ~Authority();

  Authority(const Authority&) = delete;
  Authority& operator=(const Authority&) = delete;

  // CA setup.
  const ca::CertificationAuthority& init_root(const ca::CaConfig& config);
  const ca::CertificationAuthority& init_population(std::string_view root_id, const ca::CaConfig& config);
  // An Option-1 sub-CA, co-hosted here but keyed outside the hierarchy.
  Certificate certify_external(std::string_view root_id, std::string_view ca_id, const ca::CertificatePolicy& policy);
  const ca::CertificationAuthority& provision_virtual(std::string_view population_id, const ca::CaConfig& config);
  OperatorCredential issue_operator(std::string_view operator_id, int validity_days = 365);
  // TSA certificate from the root; the key is sealed into the log.
  void setup_tsa(std::string_view root_id, std::string_view tsa_id);

  EnrollResult enroll(EnrollmentApplication application, const RegistryRecord& registry, std::string_view issuer_id,
                      std::string_view pin);
  // Throws Error("unauthorized") for a bad credential and
  // Error("unknown-card").
  LifecycleResult lifecycle(std::string_view card_id, LifecycleAction action, const OperatorCredential& credential,
                            std::string_view new_pin = {});

  ca::Issuance issue_certificate(std::string_view ca_id, const ca::IssueRequest& request);
  ca::RevocationAck revoke(std::string_view ca_id, std::uint64_t serial, revocation::RevocationReason reason);
  KeyPair recover_escrowed_key(std::string_view ca_id, std::uint64_t serial, const OperatorCredential& credential);

  revocation::HotlistEntry gateway_block(std::string_view card_id, revocation::BlockMode mode,
                                         std::optional<UnixTime> until);
  std::optional<revocation::HotlistEntry> gateway_unblock(std::string_view card_id);
  revocation::GatewayDecision gateway_check(std::string_view card_id) const;

  revocation::TimestampToken tsa_stamp(ByteView document_hash);

  // Central validation services over the current state. tsa_stamp goes
  // through the audited path above.
  toolkit::ValidationServices& services();

  // Views.
  std::uint64_t version() const;
  UnixTime now() const { return clock_(); }
  const Clock& clock() const { return clock_; }
  Random& rng() { return *rng_; }
  const ca::Hierarchy& hierarchy() const;
  const toolkit::IssuerRegistry& registry() const;
  const Repository& repository() const;
  const revocation::Hotlist& hotlist() const;
  const revocation::TimestampAuthority* tsa() const;
  const std::map<std::string, EnrollmentApplication, std::less<>>& applications() const;
  const std::map<std::string, CardRecord, std::less<>>& cards() const;
  const CardRecord& card_record(std::string_view card_id) const;
  TrustAnchorSet anchors() const;
  card::Sam sam() const;
  const std::filesystem::path& home() const { return options_.home; }
  std::filesystem::path audit_path() const { return options_.home / "audit.log"; }
  std::filesystem::path card_path(std::string_view card_id) const;

  // The emulated physical card, as last written.
  std::unique_ptr<card::Card> load_card(std::string_view card_id);
  void save_card(const card::Card& card);

 private:
  struct State;
  class AuditedServices;

  explicit Authority(AuthorityOptions options);
  void load(const std::vector<AuditEvent>& events);
  void apply(const Json& effect);
  void write_derived(const Json& effect);
  void sync_derived(const std::vector<AuditEvent>& events);
  void commit(std::string action, std::string subject, Json effects);
  void require_writable() const;
  void require_operator(const OperatorCredential& credential);
  template <typename Fn>
  decltype(auto) mutate(Fn&& fn);

  ca::Issuance issue_from(std::string_view ca_id, const ca::IssueRequest& request, Json& effects);
  void revoke_into(std::string_view ca_id, std::uint64_t serial, revocation::RevocationReason reason, Json& effects);
  const KeyPair& issuer_signing_key(std::string_view ca_id) const;
  IssuerKey issuer_public_key(std::string_view ca_id) const;
  CardRecord personalize_card(EnrollmentApplication& application, std::string_view issuer_id, std::string_view pin,
                              std::vector<Certificate>& issued, Json& effects);

  AuthorityOptions options_;
  Clock clock_;
  std::unique_ptr<Random> rng_;
  Secrets secrets_;
  std::optional<AuditLog> log_;
  std::uint64_t version_ = 0;
  int lock_fd_ = -1;
  std::unique_ptr<State> state_;
  std::unique_ptr<AuditedServices> services_;
};

}  // namespace eidpki::enrollment
