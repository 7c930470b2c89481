#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "eidpki/card/terminal.hpp"
#include "eidpki/core/path.hpp"
#include "eidpki/revocation/timestamp.hpp"
#include "eidpki/toolkit/checkers.hpp"
#include "eidpki/toolkit/services.hpp"

namespace eidpki::toolkit {

enum class ValidationMode { crl_local, ocsp_online };
enum class VerifyMode { local, outsourced };
enum class Factor { possession, pin, biometric };
enum class AuthOutcome { authenticated, denied };

std::string_view to_string(ValidationMode mode);
ValidationMode validation_mode_from_string(std::string_view name);
std::string_view to_string(VerifyMode mode);
VerifyMode verify_mode_from_string(std::string_view name);
std::string_view to_string(Factor factor);
std::string_view to_string(AuthOutcome outcome);

// Biographic fields of a card, released only when every file verified.
struct IdentityRecord {
  std::string card_id;
  std::map<std::string, std::string> fields;
};

struct AuthResult {
  AuthOutcome outcome = AuthOutcome::denied;
  std::set<Factor> factors_passed;
  ValidationOutcome cert_outcome;
  std::vector<TranscriptStep> transcript;

  bool authenticated() const { return outcome == AuthOutcome::authenticated; }
};

struct SignedDocument {
  Bytes document_hash;
  Bytes signature;
  std::string signer_issuer_id;
  std::uint64_t signer_cert_serial = 0;
  UnixTime signing_time = 0;
  std::optional<revocation::TimestampToken> timestamp_token;

  Bytes encode() const;
  static SignedDocument decode(ByteView encoded);
};

struct ToolkitConfig {
  TrustAnchorSet anchors;
  const CertificateDirectory* repository = nullptr;  // local certificate store for path building
  ValidationServices* services = nullptr;            // null when running fully offline
  const CrlStore* crls = nullptr;                    // downloaded CRLs for the local modes
  Clock clock;
  Random* rng = nullptr;  // challenges and OCSP nonces
};

// Relying-party toolkit. Holds no per-call state; every operation opens and
// closes its own channels.
class Toolkit {
 public:
  explicit Toolkit(ToolkitConfig config);

  // Throws Error("data-tampered") if any public file fails verification.
  IdentityRecord read_public_data(card::Card& card) const;

  // Channel, PIN, challenge-response, certificate validation, then the
  // optional biometric. Factor failures deny; missing validation resources
  // throw (validation-unavailable, crl-stale).
  AuthResult authenticate(card::Card& card, const card::Sam& sam, std::string_view pin, ValidationMode mode,
                          const std::optional<card::FingerprintTemplate>& probe = std::nullopt) const;

  bool match_off_card(card::Card& card, const card::Sam& sam, const card::FingerprintTemplate& probe,
                      double threshold = card::kDefaultMatchThreshold) const;
  bool match_on_card(card::Card& card, const card::Sam& sam, const card::FingerprintTemplate& probe) const;

  // Throws Error("signing-refused") unless the signature certificate
  // validates; pin-required / pin-blocked when the PIN does not pass.
  SignedDocument sign(card::Card& card, const card::Sam& sam, std::string_view pin, ByteView document,
                      bool request_timestamp, ValidationMode mode) const;

  SignatureVerification verify_signature(const SignedDocument& doc, VerifyMode mode) const;

  // Certificate validation as used by authenticate and sign.
  ValidationOutcome validate_certificate(const Certificate& cert, ValidationMode mode, UnixTime at) const;

  const ToolkitConfig& config() const { return config_; }

 private:
  ToolkitConfig config_;
};

// Downloads the current CRL of each CA into the store.
void download_crls(ValidationServices& services, const std::vector<std::string>& ca_ids, CrlStore& store);

}  // namespace eidpki::toolkit
