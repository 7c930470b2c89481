#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eidpki/ca/key_store.hpp"
#include "eidpki/ca/policy.hpp"
#include "eidpki/core/crypto.hpp"
#include "eidpki/core/path.hpp"
#include "eidpki/revocation/ledger.hpp"

namespace eidpki::ca {

enum class CaKind { root, population, subordinate_external, subordinate_virtual };
enum class CaStatus { active, suspended };

std::string_view to_string(CaKind kind);
CaKind ca_kind_from_string(std::string_view name);
std::string_view to_string(CaStatus status);

struct CertificationAuthority {
  std::string ca_id;
  CaKind kind = CaKind::root;
  std::string key_container_id;  // empty for externally operated CAs
  Certificate ca_certificate;
  std::string policy_id;
  CaStatus status = CaStatus::active;
  std::optional<std::string> parent_ca_id;

  bool holds_local_keys() const { return !key_container_id.empty(); }
  IssuerKey issuer_key() const {
    return IssuerKey{ca_id, ca_certificate.fields.public_key, ca_certificate.fields.scheme_id};
  }

  Bytes encode() const;
  static CertificationAuthority decode(ByteView encoded);
};

struct EscrowRecord {
  std::uint64_t certificate_serial = 0;
  std::string issuer_id;
  Bytes wrapped_private_key;
  std::string wrap_key_label;
  UnixTime created_at = 0;

  Bytes encode() const;
  static EscrowRecord decode(ByteView encoded);

  friend bool operator==(const EscrowRecord&, const EscrowRecord&) = default;
};

struct CaConfig {
  std::string ca_id;
  std::string scheme_id = std::string(kEd25519Scheme);
  std::uint32_t key_length_bits = kCaKeyLengthBits;
  CertificatePolicy policy;
  int validity_days = 3650;
  std::string host_id = "hsm-1";
};

// Certification request from an externally operated (Option 1) CA. Only the
// public key crosses the boundary.
struct ExternalCaRequest {
  std::string subject_id;
  Bytes public_key;
  std::string scheme_id;
  std::uint32_t key_length_bits = kCaKeyLengthBits;
  std::string policy_id;
  int validity_days = 1825;
};

struct IssueRequest {
  std::string subject_id;
  Profile profile = Profile::identity_auth;
  std::optional<Bytes> public_key;
  std::string scheme_id = std::string(kEd25519Scheme);
  std::uint32_t key_length_bits = kUserKeyLengthBits;
  // Encryption profile only: the CA generates the pair and escrows it.
  bool generate_and_escrow = false;
  std::optional<std::map<std::string, std::string>> role_attributes;
  int validity_days = 365;
  std::optional<UnixTime> not_before;  // defaults to the clock
};

struct Issuance {
  Certificate certificate;
  std::optional<EscrowRecord> escrow;
  // Returned exactly once when the CA generated the pair.
  std::optional<KeyPair> generated_key;
};

struct RevocationAck {
  std::string ca_id;
  std::uint64_t serial = 0;
  revocation::RevocationEntry entry;
  bool newly_recorded = false;
};

struct RecoveryEvent {
  std::string ca_id;
  std::uint64_t serial = 0;
  std::string operator_id;
  UnixTime at = 0;
};

// Issuance bookkeeping of one CA: what it signed, what it revoked, escrow.
struct IssuerState {
  revocation::IssuedIndex issued;
  revocation::RevocationState ledger;
  std::uint64_t next_serial = 1;
  std::map<std::uint64_t, EscrowRecord> escrow;
};

// Root, population and subordinate CAs with their key containers, policies
// and issuance state.
//
// Not internally synchronized: callers serialize mutations (the Authority
// funnels them through its single writer) and hold a shared lock for reads.
class Hierarchy : public CertificateDirectory {
 public:
  Hierarchy(Random& rng, Clock clock);

  const CertificationAuthority& init_root_ca(const CaConfig& config);
  const CertificationAuthority& init_population_ca(std::string_view root_id, const CaConfig& config);
  Certificate certify_external_sub_ca(std::string_view root_id, const ExternalCaRequest& request);
  const CertificationAuthority& provision_virtual_sub_ca(std::string_view population_id, const CaConfig& config);

  Issuance issue_end_entity(std::string_view ca_id, const IssueRequest& request);
  KeyPair recover_escrowed_key(std::string_view ca_id, std::uint64_t serial, std::string_view operator_id);
  RevocationAck revoke_certificate(std::string_view ca_id, std::uint64_t serial, revocation::RevocationReason reason,
                                   UnixTime at);
  void set_status(std::string_view ca_id, CaStatus status);

  void add_policy(const CertificatePolicy& policy);
  const CertificatePolicy& policy(std::string_view policy_id) const;
  const std::map<std::string, CertificatePolicy, std::less<>>& policies() const { return policies_; }

  const CertificationAuthority& ca(std::string_view ca_id) const;
  const CertificationAuthority* find_authority(std::string_view ca_id) const;
  const CertificationAuthority* root() const;
  std::vector<std::string> ca_ids() const;
  TrustAnchorSet anchors() const;

  const IssuerState& issuer_state(std::string_view ca_id) const;
  // Throws Error("no-local-key") for externally operated CAs.
  const KeyPair& signing_key(std::string_view ca_id) const;
  const KeyStore& key_store() const { return keys_; }
  const std::vector<RecoveryEvent>& recoveries() const { return recoveries_; }

  std::optional<Certificate> find_ca(std::string_view subject_id) const override;
  std::optional<Certificate> find(std::string_view issuer_id, std::uint64_t serial) const override;

  // Replay path, used when rebuilding state from the audit log.
  void restore_ca(const CertificationAuthority& authority, std::optional<KeyContainer> container);
  void restore_issued(std::string_view ca_id, const Certificate& certificate, std::optional<EscrowRecord> escrow);
  void restore_revocation(std::string_view ca_id, std::uint64_t serial, revocation::RevocationEntry entry);
  void restore_recovery(RecoveryEvent event);

 private:
  CertificationAuthority& mutable_ca(std::string_view ca_id);
  IssuerState& mutable_state(std::string_view ca_id);
  void require_active(const CertificationAuthority& authority) const;
  void require_new_id(std::string_view ca_id) const;
  void check_ca_issuance(const CertificationAuthority& issuer, const CertificatePolicy& governing_policy,
                         int validity_days) const;
  KeyContainer& create_container(const CaConfig& config);
  Certificate issue_ca_certificate(CertificationAuthority& issuer, std::string_view subject_id, ByteView public_key,
                                   std::string_view scheme_id, std::uint32_t key_length_bits,
                                   const CertificatePolicy& governing_policy, std::string_view subject_policy_id,
                                   int validity_days);

  Random& rng_;
  Clock clock_;
  KeyStore keys_;
  std::map<std::string, CertificatePolicy, std::less<>> policies_;
  std::map<std::string, CertificationAuthority, std::less<>> cas_;
  std::map<std::string, IssuerState, std::less<>> states_;
  std::vector<RecoveryEvent> recoveries_;
};

// An Option-1 sub-CA operated on its own infrastructure: holds its key and
// issuance state outside any Hierarchy container.
class ExternalCaOperator {
 public:
  ExternalCaOperator(std::string ca_id, std::string scheme_id, Random& rng, Clock clock);
  // Replay path: an operator whose key pair already exists.
  ExternalCaOperator(std::string ca_id, KeyPair key, Random& rng, Clock clock);

  ExternalCaRequest certification_request(std::string policy_id) const;
  void install_certificate(Certificate ca_certificate, CertificatePolicy policy);

  Issuance issue(const IssueRequest& request);
  RevocationAck revoke(std::uint64_t serial, revocation::RevocationReason reason, UnixTime at);

  void restore_issued(const Certificate& certificate);
  void restore_revocation(std::uint64_t serial, revocation::RevocationEntry entry);

  const std::string& ca_id() const { return ca_id_; }
  const CertificatePolicy& policy() const { return policy_; }
  const KeyPair& key() const { return key_; }
  const Certificate& certificate() const { return certificate_; }
  IssuerKey issuer_key() const { return IssuerKey{ca_id_, key_.public_key, key_.scheme_id}; }
  const IssuerState& state() const { return state_; }

 private:
  std::string ca_id_;
  KeyPair key_;
  Random& rng_;
  Clock clock_;
  Certificate certificate_;
  CertificatePolicy policy_;
  IssuerState state_;
};

}  // namespace eidpki::ca
