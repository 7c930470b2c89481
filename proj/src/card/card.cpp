#include "eidpki/card/card.hpp"

#include <algorithm>
#include <cmath>

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki::card {

std::string_view to_string(Applet applet) {
  switch (applet) {
    case Applet::id: return "id";
    case Applet::pki: return "pki";
    case Applet::moc: return "moc";
  }
  return "unknown";
}

std::string_view to_string(CardKey key) { return key == CardKey::auth ? "auth" : "sign"; }

std::string_view to_string(PinOutcome outcome) {
  switch (outcome) {
    case PinOutcome::ok: return "ok";
    case PinOutcome::wrong: return "wrong";
    case PinOutcome::blocked: return "blocked";
  }
  return "unknown";
}

bool is_channeled(Ins ins) {
  switch (ins) {
    case Ins::read_public:
    case Ins::read_certificate:
    case Ins::open_channel:
    case Ins::mutual_auth:
      return false;
    default:
      return true;
  }
}

std::string_view status_code(Status status) {
  switch (status) {
    case Status::ok: return "ok";
    case Status::channel_refused: return "channel-refused";
    case Status::wrong_length: return "request-malformed";
    case Status::pin_required: return "pin-required";
    case Status::pin_blocked: return "pin-blocked";
    case Status::unauthorized: return "unauthorized";
    case Status::channel_required: return "channel-required";
    case Status::wrong_applet: return "wrong-applet";
    case Status::channel_closed: return "channel-closed";
    case Status::request_malformed: return "request-malformed";
    case Status::not_found: return "not-found";
    case Status::unknown_instruction: return "unknown-instruction";
  }
  return "card-error";
}

Bytes frame_command(Ins ins, ByteView payload, ByteView mac) {
  const std::size_t len = 1 + payload.size() + mac.size();
  if (len > 0xFFFF) throw Error("request-malformed", "command frame too long");
  Bytes out;
  append_u16(out, static_cast<std::uint16_t>(len));
  out.push_back(static_cast<std::uint8_t>(ins));
  append(out, payload);
  append(out, mac);
  return out;
}

ParsedCommand parse_command(ByteView frame) {
  if (frame.size() < 3) throw Error("request-malformed", "short command frame");
  const std::size_t len = read_u16(frame);
  if (len != frame.size() - 2) throw Error("request-malformed", "command length mismatch");
  ParsedCommand cmd;
  cmd.ins = static_cast<Ins>(frame[2]);
  ByteView rest = frame.subspan(3);
  if (is_channeled(cmd.ins) && rest.size() >= 12 + kChannelMacSize) {
    cmd.payload.assign(rest.begin(), rest.end() - kChannelMacSize);
    cmd.mac.assign(rest.end() - kChannelMacSize, rest.end());
  } else {
    cmd.payload.assign(rest.begin(), rest.end());
  }
  return cmd;
}

Bytes frame_response(Status status, ByteView body, std::optional<ByteView> mac) {
  const std::size_t len = 3 + body.size() + (mac ? mac->size() : 0);
  Bytes out;
  append_u16(out, static_cast<std::uint16_t>(len));
  out.push_back(mac ? 1 : 0);
  append_u16(out, static_cast<std::uint16_t>(status));
  append(out, body);
  if (mac) append(out, *mac);
  return out;
}

ParsedResponse parse_response(ByteView frame) {
  if (frame.size() < 5) throw Error("decode-error", "short response frame");
  if (read_u16(frame) != frame.size() - 2) throw Error("decode-error", "response length mismatch");
  ParsedResponse r;
  const bool has_mac = frame[2] & 1;
  r.status = static_cast<Status>(read_u16(frame.subspan(3)));
  ByteView rest = frame.subspan(5);
  if (has_mac) {
    if (rest.size() < kChannelMacSize) throw Error("decode-error", "response MAC truncated");
    r.body.assign(rest.begin(), rest.end() - kChannelMacSize);
    r.mac = Bytes(rest.end() - kChannelMacSize, rest.end());
  } else {
    r.body.assign(rest.begin(), rest.end());
  }
  return r;
}

Bytes channel_mac(ByteView session_key, char direction, Ins ins, std::uint32_t channel_id, std::uint64_t counter,
                  std::uint16_t status, ByteView body) {
  Bytes msg;
  msg.push_back(static_cast<std::uint8_t>(direction));
  msg.push_back(static_cast<std::uint8_t>(ins));
  append_u32(msg, channel_id);
  append_u64(msg, counter);
  append_u16(msg, status);
  append(msg, body);
  Bytes mac = hmac_sha256(session_key, msg);
  mac.resize(kChannelMacSize);
  return mac;
}

Bytes derive_session_key(ByteView master_key, std::string_view card_id, ByteView nonce) {
  return sha256(concat({master_key, to_bytes(card_id), nonce}));
}

Bytes channel_proof(ByteView session_key, std::string_view role, ByteView nonce) {
  return hmac_sha256(session_key, concat({to_bytes(role), nonce}));
}

Bytes PublicDataFile::encode() const {
  return RecordWriter()
      .str("file_id", file_id)
      .bytes("content", content)
      .str("signer_id", signer_id)
      .bytes("issuer_signature", issuer_signature)
      .finish();
}

PublicDataFile PublicDataFile::decode(ByteView encoded) {
  RecordReader r(encoded);
  return PublicDataFile{r.str("file_id"), r.bytes("content"), r.str("signer_id"), r.bytes("issuer_signature")};
}

Bytes public_file_message(std::string_view file_id, ByteView content) {
  return concat({length_prefixed(to_bytes(file_id)), content});
}

PublicDataFile sign_public_file(std::string file_id, Bytes content, std::string signer_id, const KeyPair& issuer_key) {
  PublicDataFile f{std::move(file_id), std::move(content), std::move(signer_id), {}};
  f.issuer_signature = sign_message(issuer_key, public_file_message(f.file_id, f.content));
  return f;
}

bool verify_public_file(const PublicDataFile& file, const IssuerKey& issuer_key) {
  if (file.signer_id != issuer_key.issuer_id) return false;
  return verify_message(issuer_key.scheme_id, issuer_key.public_key, public_file_message(file.file_id, file.content),
                        file.issuer_signature);
}

Bytes unblock_message(std::string_view card_id) { return concat({to_bytes(card_id), to_bytes("unblock")}); }

void check_pin_format(std::string_view pin) {
  if (pin.size() < 4 || pin.size() > 8) throw Error("pin-invalid", "PIN must have 4 to 8 digits");
  if (!std::all_of(pin.begin(), pin.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw Error("pin-invalid", "PIN must be digits only");
  }
}

Bytes hash_pin(ByteView salt, std::string_view pin) { return sha256(concat({salt, to_bytes(pin)})); }

namespace {

constexpr std::size_t kChannelHeader = 12;  // channel id + counter

std::pair<Status, Bytes> status_only(Status s) { return {s, {}}; }

bool pin_matches(const PinState& pin, std::string_view attempt) {
  return constant_time_equal(hash_pin(pin.pin_salt, attempt), pin.pin_hash);
}

Bytes encode_key_pair(const KeyPair& k) {
  return RecordWriter()
      .bytes("public_key", k.public_key)
      .bytes("private_key", k.private_key)
      .str("scheme_id", k.scheme_id)
      .u64("key_length_bits", k.key_length_bits)
      .finish();
}

KeyPair decode_key_pair(ByteView encoded) {
  RecordReader r(encoded);
  return KeyPair{r.bytes("public_key"), r.bytes("private_key"), r.str("scheme_id"),
                 static_cast<std::uint32_t>(r.u64("key_length_bits"))};
}

Bytes encode_issuer_key(const IssuerKey& k) {
  return RecordWriter().str("issuer_id", k.issuer_id).bytes("public_key", k.public_key).str("scheme_id", k.scheme_id).finish();
}

IssuerKey decode_issuer_key(ByteView encoded) {
  RecordReader r(encoded);
  return IssuerKey{r.str("issuer_id"), r.bytes("public_key"), r.str("scheme_id")};
}

// Thresholds persist in millionths so the encoding stays integral.
constexpr double kThresholdScale = 1'000'000.0;

void check_threshold(double t) {
  if (!(t > 0.0 && t <= 1.0)) throw Error("request-malformed", "match threshold must be in (0, 1]");
}

}  // namespace

std::unique_ptr<Card> Card::personalize(Personalization input, Random& rng) {
  if (input.card_id.empty()) throw Error("request-malformed", "card_id required");
  check_pin_format(input.pin);
  input.fingerprint.validate();
  check_threshold(input.match_threshold);
  if (input.auth_pair.public_key != input.auth_certificate.fields.public_key ||
      input.sign_pair.public_key != input.sign_certificate.fields.public_key) {
    throw Error("request-malformed", "card key pair does not match its certificate");
  }
  if (input.sm_master_key.size() != kSymmetricKeySize) throw Error("request-malformed", "master key must be 32 bytes");

  std::unique_ptr<Card> card(new Card());
  card->card_id_ = std::move(input.card_id);
  card->files_ = std::move(input.files);
  card->auth_pair_ = std::move(input.auth_pair);
  card->auth_certificate_ = std::move(input.auth_certificate);
  card->sign_pair_ = std::move(input.sign_pair);
  card->sign_certificate_ = std::move(input.sign_certificate);
  card->pin_.pin_salt = rng.bytes(16);
  card->pin_.pin_hash = hash_pin(card->pin_.pin_salt, input.pin);
  card->template_ = std::move(input.fingerprint);
  card->match_threshold_ = input.match_threshold;
  card->sm_master_key_label_ = std::move(input.sm_master_key_label);
  card->sm_master_key_ = std::move(input.sm_master_key);
  card->unblock_authority_ = std::move(input.unblock_authority);
  card->rng_ = std::make_unique<Random>(rng.bytes(32));
  return card;
}

void Card::install_certificates(Certificate auth_certificate, Certificate sign_certificate) {
  std::lock_guard lock(mutex_);
  if (auth_certificate.fields.public_key != auth_pair_.public_key ||
      sign_certificate.fields.public_key != sign_pair_.public_key) {
    throw Error("request-malformed", "certificate keys do not match the card");
  }
  auth_certificate_ = std::move(auth_certificate);
  sign_certificate_ = std::move(sign_certificate);
}

std::unique_lock<std::timed_mutex> Card::acquire_session(std::chrono::milliseconds timeout) {
  std::unique_lock<std::timed_mutex> lock(session_, std::defer_lock);
  if (!lock.try_lock_for(timeout)) throw Error("card-busy", "card " + card_id_ + " is in use by another channel");
  return lock;
}

Bytes Card::transmit(ByteView command) {
  std::lock_guard lock(mutex_);
  traffic_.push_back({true, Bytes(command.begin(), command.end())});
  Bytes response = handle(command);
  traffic_.push_back({false, response});
  return response;
}

std::vector<TrafficRecord> Card::traffic() const {
  std::lock_guard lock(mutex_);
  return traffic_;
}

void Card::clear_traffic() {
  std::lock_guard lock(mutex_);
  traffic_.clear();
}

std::uint64_t Card::channel_opens() const {
  std::lock_guard lock(mutex_);
  return channel_opens_;
}

int Card::retries_remaining() const {
  std::lock_guard lock(mutex_);
  return pin_.retries_remaining;
}

bool Card::pin_blocked() const {
  std::lock_guard lock(mutex_);
  return pin_.blocked;
}

bool Card::channel_open() const {
  std::lock_guard lock(mutex_);
  return channel_ && channel_->open;
}

Bytes Card::handle(ByteView command) {
  ParsedCommand cmd;
  try {
    cmd = parse_command(command);
  } catch (const Error&) {
    close_channel();
    return frame_response(Status::wrong_length, {});
  }
  if (is_channeled(cmd.ins)) return handle_channeled(cmd);
  Bytes response = handle_plain(cmd);
  // A garbled frame arriving while a channel is open ends the channel, even
  // when the damage turned it into a plain instruction.
  const Status status = parse_response(response).status;
  if (status == Status::request_malformed || status == Status::unknown_instruction) close_channel();
  return response;
}

Bytes Card::handle_plain(const ParsedCommand& cmd) {
  switch (cmd.ins) {
    case Ins::read_public: {
      if (!cmd.payload.empty()) return frame_response(Status::request_malformed, {});
      std::vector<Bytes> items;
      for (const PublicDataFile& f : files_) items.push_back(f.encode());
      return frame_response(Status::ok, encode_list(items));
    }
    case Ins::read_certificate: {
      if (cmd.payload.size() != 1) return frame_response(Status::request_malformed, {});
      if (cmd.payload[0] == static_cast<std::uint8_t>(CardKey::auth)) {
        return frame_response(Status::ok, auth_certificate_.encode());
      }
      if (cmd.payload[0] == static_cast<std::uint8_t>(CardKey::sign)) {
        return frame_response(Status::ok, sign_certificate_.encode());
      }
      return frame_response(Status::not_found, {});
    }
    case Ins::open_channel: {
      if (cmd.payload.size() != 1 || cmd.payload[0] < 1 || cmd.payload[0] > 3) {
        return frame_response(Status::request_malformed, {});
      }
      close_channel();
      Channel ch;
      ch.channel_id = next_channel_id_++;
      ch.applet = static_cast<Applet>(cmd.payload[0]);
      ch.nonce = rng_->bytes(kChannelNonceSize);
      ch.session_key = derive_session_key(sm_master_key_, card_id_, ch.nonce);
      channel_ = ch;
      ++channel_opens_;
      Bytes body;
      append_u32(body, ch.channel_id);
      append(body, ch.nonce);
      return frame_response(Status::ok, body);
    }
    case Ins::mutual_auth: {
      if (cmd.payload.size() != 4 + kHashSize) return frame_response(Status::request_malformed, {});
      const std::uint32_t id = read_u32(cmd.payload);
      if (!channel_ || channel_->channel_id != id || channel_->authenticated) {
        return frame_response(Status::channel_required, {});
      }
      ByteView proof(cmd.payload.data() + 4, kHashSize);
      if (!constant_time_equal(proof, channel_proof(channel_->session_key, "terminal", channel_->nonce))) {
        channel_.reset();
        return frame_response(Status::channel_refused, {});
      }
      channel_->authenticated = true;
      channel_->open = true;
      pin_.verified_in_session = false;
      sign_confirmed_ = false;
      return frame_response(Status::ok, channel_proof(channel_->session_key, "card", channel_->nonce));
    }
    default:
      return frame_response(Status::unknown_instruction, {});
  }
}

void Card::close_channel() {
  if (channel_) channel_->open = false;
  pin_.verified_in_session = false;
  sign_confirmed_ = false;
}

Bytes Card::handle_channeled(const ParsedCommand& cmd) {
  if (!channel_ || !channel_->open) return frame_response(Status::channel_required, {});
  if (cmd.payload.size() < kChannelHeader || cmd.mac.size() != kChannelMacSize) {
    close_channel();
    return frame_response(Status::channel_closed, {});
  }
  const std::uint32_t id = read_u32(cmd.payload);
  if (id != channel_->channel_id) {
    close_channel();
    return frame_response(Status::channel_closed, {});
  }
  const std::uint64_t counter = read_u64(ByteView(cmd.payload).subspan(4));
  ByteView body = ByteView(cmd.payload).subspan(kChannelHeader);
  const Bytes expected = channel_mac(channel_->session_key, 'C', cmd.ins, id, counter, 0, body);
  if (!constant_time_equal(expected, cmd.mac) || counter <= channel_->recv_counter) {
    close_channel();
    return frame_response(Status::channel_closed, {});
  }
  channel_->recv_counter = counter;

  auto reply = [&](Status status, ByteView out) {
    const Bytes mac = channel_mac(channel_->session_key, 'R', cmd.ins, id, counter, static_cast<std::uint16_t>(status), out);
    return frame_response(status, out, ByteView(mac));
  };
  auto require = [&](Applet applet) { return channel_->applet == applet; };

  std::pair<Status, Bytes> result;
  switch (cmd.ins) {
    case Ins::close_channel: {
      Bytes out = reply(Status::ok, {});
      close_channel();
      return out;
    }
    case Ins::verify_pin:
      result = require(Applet::pki) ? do_verify_pin(body) : status_only(Status::wrong_applet);
      break;
    case Ins::unblock_pin:
      result = require(Applet::pki) ? do_unblock(body) : status_only(Status::wrong_applet);
      break;
    case Ins::sign:
      result = require(Applet::pki) ? do_sign(body) : status_only(Status::wrong_applet);
      break;
    case Ins::read_template:
      result = require(Applet::id) ? std::pair{Status::ok, template_.encode()} : status_only(Status::wrong_applet);
      break;
    case Ins::moc_match:
      result = require(Applet::moc) ? do_moc_match(body) : status_only(Status::wrong_applet);
      break;
    default:
      result = status_only(Status::unknown_instruction);
  }
  return reply(result.first, result.second);
}

std::pair<Status, Bytes> Card::do_verify_pin(ByteView body) {
  const std::string attempt = eidpki::to_string(body);
  try {
    check_pin_format(attempt);
  } catch (const Error&) {
    return status_only(Status::request_malformed);
  }
  auto result = [&](PinOutcome outcome) {
    return std::pair{Status::ok, Bytes{static_cast<std::uint8_t>(outcome), static_cast<std::uint8_t>(pin_.retries_remaining)}};
  };
  if (pin_.blocked) return result(PinOutcome::blocked);
  if (pin_matches(pin_, attempt)) {
    pin_.retries_remaining = kPinRetryLimit;
    pin_.verified_in_session = true;
    sign_confirmed_ = true;
    return result(PinOutcome::ok);
  }
  pin_.verified_in_session = false;
  sign_confirmed_ = false;
  --pin_.retries_remaining;
  if (pin_.retries_remaining <= 0) {
    pin_.retries_remaining = 0;
    pin_.blocked = true;
    return result(PinOutcome::blocked);
  }
  return result(PinOutcome::wrong);
}

std::pair<Status, Bytes> Card::do_unblock(ByteView body) {
  if (body.size() < 4) return status_only(Status::request_malformed);
  const std::uint32_t sig_len = read_u32(body);
  if (body.size() < 4 + std::size_t{sig_len}) return status_only(Status::request_malformed);
  ByteView signature = body.subspan(4, sig_len);
  const std::string new_pin = eidpki::to_string(body.subspan(4 + sig_len));
  bool authorized = false;
  try {
    authorized = verify_message(unblock_authority_.scheme_id, unblock_authority_.public_key, unblock_message(card_id_),
                                signature);
  } catch (const Error&) {
    authorized = false;
  }
  if (!authorized) return status_only(Status::unauthorized);
  try {
    check_pin_format(new_pin);
  } catch (const Error&) {
    return status_only(Status::request_malformed);
  }
  pin_.pin_salt = rng_->bytes(16);
  pin_.pin_hash = hash_pin(pin_.pin_salt, new_pin);
  pin_.retries_remaining = kPinRetryLimit;
  pin_.blocked = false;
  pin_.verified_in_session = false;
  sign_confirmed_ = false;
  return status_only(Status::ok);
}

std::pair<Status, Bytes> Card::do_sign(ByteView body) {
  if (body.size() != 2 + kHashSize) return status_only(Status::request_malformed);
  const auto key = static_cast<CardKey>(body[0]);
  const bool confirmed = body[1] == 1;
  ByteView hash = body.subspan(2);
  if (key != CardKey::auth && key != CardKey::sign) return status_only(Status::request_malformed);
  if (pin_.blocked) return status_only(Status::pin_blocked);
  if (!pin_.verified_in_session) return status_only(Status::pin_required);
  if (key == CardKey::auth) return {Status::ok, sign_message(auth_pair_, hash)};
  if (!confirmed || !sign_confirmed_) return status_only(Status::pin_required);
  sign_confirmed_ = false;
  return {Status::ok, sign_message(sign_pair_, hash)};
}

std::pair<Status, Bytes> Card::do_moc_match(ByteView body) {
  FingerprintTemplate probe;
  try {
    probe = FingerprintTemplate::decode(body);
  } catch (const Error&) {
    return status_only(Status::request_malformed);
  }
  const MatchResult m = match_templates(template_, probe, match_threshold_);
  const std::size_t denom = std::max(template_.minutiae.size(), probe.minutiae.size());
  Bytes out{static_cast<std::uint8_t>(m.decision ? 1 : 0)};
  append_u16(out, static_cast<std::uint16_t>(m.matched));
  append_u16(out, static_cast<std::uint16_t>(denom));
  return {Status::ok, out};
}

Bytes Card::serialize(ByteView seal_key, Random& rng) const {
  std::lock_guard lock(mutex_);
  const Bytes secrets = RecordWriter()
                            .bytes("auth_pair", encode_key_pair(auth_pair_))
                            .bytes("sign_pair", encode_key_pair(sign_pair_))
                            .bytes("pin_salt", pin_.pin_salt)
                            .bytes("pin_hash", pin_.pin_hash)
                            .bytes("template", template_.encode())
                            .bytes("sm_master_key", sm_master_key_)
                            .finish();
  std::vector<Bytes> files;
  for (const PublicDataFile& f : files_) files.push_back(f.encode());
  return RecordWriter()
      .str("card_id", card_id_)
      .bytes("files", encode_list(files))
      .bytes("auth_certificate", auth_certificate_.encode())
      .bytes("sign_certificate", sign_certificate_.encode())
      .u64("retries_remaining", static_cast<std::uint64_t>(pin_.retries_remaining))
      .boolean("blocked", pin_.blocked)
      .u64("match_threshold", static_cast<std::uint64_t>(std::llround(match_threshold_ * kThresholdScale)))
      .str("sm_master_key_label", sm_master_key_label_)
      .bytes("unblock_authority", encode_issuer_key(unblock_authority_))
      .bytes("sealed", aead_seal(seal_key, secrets, to_bytes("card:" + card_id_), rng))
      .finish();
}

std::unique_ptr<Card> Card::deserialize(ByteView encoded, ByteView seal_key, Random& rng) {
  RecordReader r(encoded);
  std::unique_ptr<Card> card(new Card());
  card->card_id_ = r.str("card_id");
  for (const Bytes& item : decode_list(r.bytes("files"))) card->files_.push_back(PublicDataFile::decode(item));
  card->auth_certificate_ = Certificate::decode(r.bytes("auth_certificate"));
  card->sign_certificate_ = Certificate::decode(r.bytes("sign_certificate"));
  const std::uint64_t retries = r.u64("retries_remaining");
  if (retries > static_cast<std::uint64_t>(kPinRetryLimit)) throw Error("decode-error", "retries out of range");
  card->pin_.retries_remaining = static_cast<int>(retries);
  card->pin_.blocked = r.boolean("blocked");
  if (card->pin_.blocked != (card->pin_.retries_remaining == 0)) throw Error("decode-error", "inconsistent PIN state");
  card->match_threshold_ = static_cast<double>(r.u64("match_threshold")) / kThresholdScale;
  check_threshold(card->match_threshold_);
  card->sm_master_key_label_ = r.str("sm_master_key_label");
  card->unblock_authority_ = decode_issuer_key(r.bytes("unblock_authority"));

  const Bytes secrets = aead_open(seal_key, r.bytes("sealed"), to_bytes("card:" + card->card_id_));
  RecordReader s(secrets);
  card->auth_pair_ = decode_key_pair(s.bytes("auth_pair"));
  card->sign_pair_ = decode_key_pair(s.bytes("sign_pair"));
  card->pin_.pin_salt = s.bytes("pin_salt");
  card->pin_.pin_hash = s.bytes("pin_hash");
  card->template_ = FingerprintTemplate::decode(s.bytes("template"));
  card->sm_master_key_ = s.bytes("sm_master_key");
  card->rng_ = std::make_unique<Random>(rng.bytes(32));
  return card;
}

}  // namespace eidpki::card
