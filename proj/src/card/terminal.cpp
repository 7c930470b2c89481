#include "eidpki/card/terminal.hpp"

#include <utility>

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki::card {

namespace {

[[noreturn]] void fail(Status status, std::string_view what) {
  throw Error(std::string(status_code(status)), std::string(what));
}

ParsedResponse plain_exchange(Card& card, Ins ins, ByteView payload) {
  return parse_response(card.transmit(frame_command(ins, payload)));
}

}  // namespace

Bytes Sam::session_key(std::string_view label, std::string_view card_id, ByteView nonce) const {
  auto it = master_keys_.find(label);
  if (it == master_keys_.end()) throw Error("channel-refused", "SAM " + sam_id_ + " has no key " + std::string(label));
  return derive_session_key(it->second, card_id, nonce);
}

SecureChannel SecureChannel::open(Card& card, const Sam& sam, Applet applet, std::chrono::milliseconds wait) {
  if (!sam.has_key(card.sm_master_key_label())) {
    throw Error("channel-refused", "SAM lacks key " + card.sm_master_key_label());
  }
  SecureChannel ch;
  ch.card_ = &card;
  ch.applet_ = applet;
  ch.session_ = card.acquire_session(wait);

  const ParsedResponse opened = plain_exchange(card, Ins::open_channel, Bytes{static_cast<std::uint8_t>(applet)});
  if (opened.status != Status::ok) fail(opened.status, "open channel");
  if (opened.body.size() != 4 + kChannelNonceSize) throw Error("channel-refused", "bad open response");
  ch.channel_id_ = read_u32(opened.body);
  const Bytes nonce(opened.body.begin() + 4, opened.body.end());
  ch.session_key_ = sam.session_key(card.sm_master_key_label(), card.card_id(), nonce);

  Bytes auth;
  append_u32(auth, ch.channel_id_);
  append(auth, channel_proof(ch.session_key_, "terminal", nonce));
  const ParsedResponse confirmed = plain_exchange(card, Ins::mutual_auth, auth);
  if (confirmed.status != Status::ok) fail(confirmed.status, "mutual authentication");
  if (!constant_time_equal(confirmed.body, channel_proof(ch.session_key_, "card", nonce))) {
    throw Error("channel-refused", "card failed key confirmation");
  }
  ch.open_ = true;
  return ch;
}

SecureChannel::SecureChannel(SecureChannel&& other) noexcept
    : card_(std::exchange(other.card_, nullptr)),
      session_(std::move(other.session_)),
      session_key_(std::move(other.session_key_)),
      channel_id_(other.channel_id_),
      applet_(other.applet_),
      send_counter_(other.send_counter_),
      open_(std::exchange(other.open_, false)) {}

SecureChannel& SecureChannel::operator=(SecureChannel&& other) noexcept {
  if (this != &other) {
    release();
    card_ = std::exchange(other.card_, nullptr);
    session_ = std::move(other.session_);
    session_key_ = std::move(other.session_key_);
    channel_id_ = other.channel_id_;
    applet_ = other.applet_;
    send_counter_ = other.send_counter_;
    open_ = std::exchange(other.open_, false);
  }
  return *this;
}

SecureChannel::~SecureChannel() { release(); }

void SecureChannel::release() noexcept {
  try {
    close();
  } catch (...) {
  }
  open_ = false;
  if (session_.owns_lock()) session_.unlock();
}

Bytes SecureChannel::wrap(Ins ins, ByteView body) {
  if (!open_) throw Error("channel-required", "channel is not open");
  ++send_counter_;
  Bytes payload;
  append_u32(payload, channel_id_);
  append_u64(payload, send_counter_);
  append(payload, body);
  const Bytes mac = channel_mac(session_key_, 'C', ins, channel_id_, send_counter_, 0, body);
  return frame_command(ins, payload, mac);
}

Bytes SecureChannel::unwrap(Ins ins, ByteView response) {
  ParsedResponse r;
  try {
    r = parse_response(response);
  } catch (const Error&) {
    open_ = false;
    throw Error("channel-closed", "unreadable response");
  }
  if (!r.mac) {
    if (r.status == Status::channel_closed || r.status == Status::channel_required) open_ = false;
    if (r.status == Status::ok) {
      open_ = false;
      throw Error("channel-closed", "unauthenticated response");
    }
    fail(r.status, "card refused command");
  }
  const Bytes expected =
      channel_mac(session_key_, 'R', ins, channel_id_, send_counter_, static_cast<std::uint16_t>(r.status), r.body);
  if (!constant_time_equal(expected, *r.mac)) {
    open_ = false;
    throw Error("channel-closed", "response MAC mismatch");
  }
  if (r.status != Status::ok) fail(r.status, "card refused command");
  return r.body;
}

Bytes SecureChannel::exchange(Ins ins, ByteView body) {
  const Bytes command = wrap(ins, body);
  return unwrap(ins, card_->transmit(command));
}

void SecureChannel::close() {
  if (open_) {
    try {
      exchange(Ins::close_channel, {});
    } catch (const Error&) {
    }
  }
  open_ = false;
  if (session_.owns_lock()) session_.unlock();
}

std::vector<PublicDataFile> read_public_data(Card& card) {
  const ParsedResponse r = plain_exchange(card, Ins::read_public, {});
  if (r.status != Status::ok) fail(r.status, "read public data");
  std::vector<PublicDataFile> files;
  for (const Bytes& item : decode_list(r.body)) files.push_back(PublicDataFile::decode(item));
  return files;
}

Certificate read_card_certificate(Card& card, CardKey key) {
  const ParsedResponse r = plain_exchange(card, Ins::read_certificate, Bytes{static_cast<std::uint8_t>(key)});
  if (r.status != Status::ok) fail(r.status, "read certificate");
  return Certificate::decode(r.body);
}

SecureChannel open_secure_channel(Card& card, const Sam& sam, Applet applet) {
  return SecureChannel::open(card, sam, applet);
}

PinResult verify_pin(SecureChannel& channel, std::string_view pin_attempt) {
  const Bytes body = channel.exchange(Ins::verify_pin, to_bytes(pin_attempt));
  if (body.size() != 2 || body[0] > 2) throw Error("decode-error", "bad verify response");
  return PinResult{static_cast<PinOutcome>(body[0]), body[1]};
}

void unblock_pin(SecureChannel& channel, ByteView admin_auth, std::string_view new_pin) {
  Bytes body;
  append_u32(body, static_cast<std::uint32_t>(admin_auth.size()));
  append(body, admin_auth);
  append(body, to_bytes(new_pin));
  channel.exchange(Ins::unblock_pin, body);
}

Bytes card_sign(SecureChannel& channel, CardKey key, ByteView payload_hash, bool confirmed) {
  if (payload_hash.size() != kHashSize) throw Error("request-malformed", "payload hash must be 32 bytes");
  Bytes body{static_cast<std::uint8_t>(key), static_cast<std::uint8_t>(confirmed ? 1 : 0)};
  append(body, payload_hash);
  return channel.exchange(Ins::sign, body);
}

FingerprintTemplate read_fingerprint_template(SecureChannel& channel) {
  return FingerprintTemplate::decode(channel.exchange(Ins::read_template, {}));
}

FingerprintTemplate read_fingerprint_template(Card& card) {
  const ParsedResponse r = plain_exchange(card, Ins::read_template, {});
  if (r.status != Status::ok) fail(r.status, "read fingerprint template");
  throw Error("channel-closed", "card answered an unprotected template read");
}

MatchResult moc_match(SecureChannel& channel, const FingerprintTemplate& probe) {
  const Bytes body = channel.exchange(Ins::moc_match, probe.encode());
  if (body.size() != 5) throw Error("decode-error", "bad match response");
  MatchResult m;
  m.decision = body[0] == 1;
  m.matched = read_u16(ByteView(body).subspan(1));
  const std::uint16_t denom = read_u16(ByteView(body).subspan(3));
  m.score = denom == 0 ? 0.0 : static_cast<double>(m.matched) / denom;
  return m;
}

}  // namespace eidpki::card
