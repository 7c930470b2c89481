#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eidpki/card/fingerprint.hpp"
#include "eidpki/core/certificate.hpp"
#include "eidpki/core/path.hpp"
#include "eidpki/core/signature_scheme.hpp"

namespace eidpki::card {

enum class Applet : std::uint8_t { id = 1, pki = 2, moc = 3 };
enum class CardKey : std::uint8_t { auth = 1, sign = 2 };

std::string_view to_string(Applet applet);
std::string_view to_string(CardKey key);

// Instruction bytes. Instructions below 0x10 and the two channel set-up
// instructions travel in plain frames; everything else is channeled.
enum class Ins : std::uint8_t {
  read_public = 0x01,
  read_certificate = 0x02,
  open_channel = 0x10,
  mutual_auth = 0x11,
  verify_pin = 0x20,
  unblock_pin = 0x21,
  sign = 0x22,
  read_template = 0x30,
  moc_match = 0x31,
  close_channel = 0x3F,
};

bool is_channeled(Ins ins);

// Status words returned in every response frame.
enum class Status : std::uint16_t {
  ok = 0x9000,
  channel_refused = 0x6300,
  wrong_length = 0x6700,
  pin_required = 0x6982,
  pin_blocked = 0x6983,
  unauthorized = 0x6984,
  channel_required = 0x6985,
  wrong_applet = 0x6986,
  channel_closed = 0x6988,
  request_malformed = 0x6A80,
  not_found = 0x6A82,
  unknown_instruction = 0x6D00,
};

// Stable error code for a non-ok status, e.g. "pin-required".
std::string_view status_code(Status status);

inline constexpr std::size_t kChannelMacSize = 16;
inline constexpr std::size_t kChannelNonceSize = 16;
inline constexpr int kPinRetryLimit = 3;

// Frame layouts.
//   command:  u16be(len) ins payload [mac16]         len covers ins..end
//   response: u16be(len) flags u16be(sw) body [mac16] flags bit0 = MAC present
// Channeled payload: u32be(channel_id) u64be(counter) body.
Bytes frame_command(Ins ins, ByteView payload, ByteView mac = {});

struct ParsedCommand {
  Ins ins{};
  Bytes payload;
  Bytes mac;
};
// Throws Error("request-malformed").
ParsedCommand parse_command(ByteView frame);

struct ParsedResponse {
  Status status = Status::ok;
  Bytes body;
  std::optional<Bytes> mac;
};
Bytes frame_response(Status status, ByteView body, std::optional<ByteView> mac = std::nullopt);
ParsedResponse parse_response(ByteView frame);

// MAC over one channeled message. `direction` is 'C' for commands and 'R' for
// responses; truncated HMAC-SHA256 under the session key.
Bytes channel_mac(ByteView session_key, char direction, Ins ins, std::uint32_t channel_id, std::uint64_t counter,
                  std::uint16_t status, ByteView body);

// KDF for session keys: SHA-256(master_key || card_id || nonce).
Bytes derive_session_key(ByteView master_key, std::string_view card_id, ByteView nonce);

// Key-confirmation proofs exchanged during mutual authentication.
Bytes channel_proof(ByteView session_key, std::string_view role, ByteView nonce);

struct PublicDataFile {
  std::string file_id;
  Bytes content;
  std::string signer_id;
  Bytes issuer_signature;  // over file_id || content

  Bytes encode() const;
  static PublicDataFile decode(ByteView encoded);

  friend bool operator==(const PublicDataFile&, const PublicDataFile&) = default;
};

Bytes public_file_message(std::string_view file_id, ByteView content);
PublicDataFile sign_public_file(std::string file_id, Bytes content, std::string signer_id, const KeyPair& issuer_key);
bool verify_public_file(const PublicDataFile& file, const IssuerKey& issuer_key);

// Message the issuing authority signs to authorize a PIN unblock.
Bytes unblock_message(std::string_view card_id);

struct PinState {
  Bytes pin_salt;
  Bytes pin_hash;
  int retries_remaining = kPinRetryLimit;
  bool blocked = false;
  bool verified_in_session = false;
};

enum class PinOutcome : std::uint8_t { ok = 0, wrong = 1, blocked = 2 };
std::string_view to_string(PinOutcome outcome);

struct PinResult {
  PinOutcome outcome = PinOutcome::ok;
  int retries_remaining = 0;
};

// Throws Error("pin-invalid") unless the pin is 4 to 8 ASCII digits.
void check_pin_format(std::string_view pin);
Bytes hash_pin(ByteView salt, std::string_view pin);

// Everything the personalization bureau writes onto a fresh card.
struct Personalization {
  std::string card_id;
  std::vector<PublicDataFile> files;
  KeyPair auth_pair;
  Certificate auth_certificate;
  KeyPair sign_pair;
  Certificate sign_certificate;
  std::string pin;
  FingerprintTemplate fingerprint;
  double match_threshold = kDefaultMatchThreshold;
  std::string sm_master_key_label;
  Bytes sm_master_key;
  IssuerKey unblock_authority;  // verifies admin credentials for unblock
};

struct TrafficRecord {
  bool to_card = true;
  Bytes frame;
};

// The card side. Commands arrive as frames through transmit(); nothing else
// reaches applet state. A card runs one secure channel at a time: channel
// sessions are claimed with acquire_session() and further claims wait.
class Card {
 public:
  // Throws Error("pin-invalid"), Error("template-invalid") or
  // Error("request-malformed") on inconsistent key material.
  static std::unique_ptr<Card> personalize(Personalization input, Random& rng);

  Card(const Card&) = delete;
  Card& operator=(const Card&) = delete;

  Bytes transmit(ByteView command);

  // Issuer-side update after renewal. The new certificates must carry the
  // keys already on the chip; throws Error("request-malformed") otherwise.
  void install_certificates(Certificate auth_certificate, Certificate sign_certificate);

  const std::string& card_id() const { return card_id_; }
  const std::string& sm_master_key_label() const { return sm_master_key_label_; }
  std::uint64_t auth_certificate_serial() const { return auth_certificate_.fields.serial; }
  std::uint64_t sign_certificate_serial() const { return sign_certificate_.fields.serial; }

  // Session claim held by a terminal-side channel for its lifetime.
  // Throws Error("card-busy") if the claim cannot be had within timeout.
  std::unique_lock<std::timed_mutex> acquire_session(std::chrono::milliseconds timeout);

  // Inspection for tests and audits.
  std::vector<TrafficRecord> traffic() const;
  void clear_traffic();
  std::uint64_t channel_opens() const;
  int retries_remaining() const;
  bool pin_blocked() const;
  bool channel_open() const;

  // Persistence: public part in the clear, secrets only inside the sealed block.
  Bytes serialize(ByteView seal_key, Random& rng) const;
  static std::unique_ptr<Card> deserialize(ByteView encoded, ByteView seal_key, Random& rng);

 private:
  struct Channel {
    std::uint32_t channel_id = 0;
    Applet applet = Applet::pki;
    Bytes nonce;
    Bytes session_key;
    std::uint64_t recv_counter = 0;
    bool authenticated = false;
    bool open = false;
  };

  Card() = default;

  Bytes handle(ByteView command);
  Bytes handle_plain(const ParsedCommand& cmd);
  Bytes handle_channeled(const ParsedCommand& cmd);
  void close_channel();

  std::pair<Status, Bytes> do_verify_pin(ByteView body);
  std::pair<Status, Bytes> do_unblock(ByteView body);
  std::pair<Status, Bytes> do_sign(ByteView body);
  std::pair<Status, Bytes> do_moc_match(ByteView body);

  std::string card_id_;
  std::vector<PublicDataFile> files_;
  KeyPair auth_pair_;
  Certificate auth_certificate_;
  KeyPair sign_pair_;
  Certificate sign_certificate_;
  PinState pin_;
  bool sign_confirmed_ = false;  // per-signature PIN confirmation, consumed by one signature
  FingerprintTemplate template_;
  double match_threshold_ = kDefaultMatchThreshold;
  std::string sm_master_key_label_;
  Bytes sm_master_key_;
  IssuerKey unblock_authority_;

  std::unique_ptr<Random> rng_;
  std::optional<Channel> channel_;
  std::uint32_t next_channel_id_ = 1;
  std::uint64_t channel_opens_ = 0;
  std::vector<TrafficRecord> traffic_;

  mutable std::mutex mutex_;
  std::timed_mutex session_;
};

}  // namespace eidpki::card
