#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "eidpki/card/card.hpp"

namespace eidpki::card {

// Security access module on the terminal side. Master keys stay inside; only
// per-channel session keys come out.
class Sam {
 public:
  Sam(std::string sam_id, std::map<std::string, Bytes, std::less<>> master_keys)
      : sam_id_(std::move(sam_id)), master_keys_(std::move(master_keys)) {}

  const std::string& sam_id() const { return sam_id_; }
  bool has_key(std::string_view label) const { return master_keys_.count(label) != 0; }
  // Throws Error("channel-refused") if the label is unknown.
  Bytes session_key(std::string_view label, std::string_view card_id, ByteView nonce) const;

 private:
  std::string sam_id_;
  std::map<std::string, Bytes, std::less<>> master_keys_;
};

inline constexpr std::chrono::milliseconds kSessionWait{5000};

// Terminal end of a secure channel. Owns the card's session claim until it
// is closed or destroyed.
class SecureChannel {
 public:
  // Throws Error("channel-refused") when the SAM lacks the key or mutual
  // authentication fails, Error("card-busy") if the card stays claimed.
  static SecureChannel open(Card& card, const Sam& sam, Applet applet,
                            std::chrono::milliseconds wait = kSessionWait);

  SecureChannel(SecureChannel&& other) noexcept;
  SecureChannel& operator=(SecureChannel&&) noexcept;
  ~SecureChannel();

  // One command/response round trip. Non-ok status words surface as
  // Error(status_code(sw)); integrity failures also mark the channel closed.
  Bytes exchange(Ins ins, ByteView body);

  // Lower-level halves of exchange(), exposed for traffic tests.
  Bytes wrap(Ins ins, ByteView body);
  Bytes unwrap(Ins ins, ByteView response);

  void close();
  bool is_open() const { return open_; }
  Applet applet() const { return applet_; }
  std::uint32_t channel_id() const { return channel_id_; }
  Card& card() const { return *card_; }

 private:
  SecureChannel() = default;
  void release() noexcept;

  Card* card_ = nullptr;
  std::unique_lock<std::timed_mutex> session_;
  Bytes session_key_;
  std::uint32_t channel_id_ = 0;
  Applet applet_ = Applet::pki;
  std::uint64_t send_counter_ = 0;
  bool open_ = false;
};

std::vector<PublicDataFile> read_public_data(Card& card);
Certificate read_card_certificate(Card& card, CardKey key);

SecureChannel open_secure_channel(Card& card, const Sam& sam, Applet applet);

PinResult verify_pin(SecureChannel& channel, std::string_view pin_attempt);
// admin_auth: issuer signature over unblock_message(card_id).
void unblock_pin(SecureChannel& channel, ByteView admin_auth, std::string_view new_pin);
// `confirmed` is the per-signature confirmation the signature key demands.
Bytes card_sign(SecureChannel& channel, CardKey key, ByteView payload_hash, bool confirmed);

FingerprintTemplate read_fingerprint_template(SecureChannel& channel);
// Attempt without a channel: always refused by the card with channel-required.
FingerprintTemplate read_fingerprint_template(Card& card);

MatchResult moc_match(SecureChannel& channel, const FingerprintTemplate& probe);

}  // namespace eidpki::card
