#include "eidpki/revocation/timestamp.hpp"

#include <algorithm>

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/crypto.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki::revocation {

Bytes TimestampToken::tbs() const {
  return RecordWriter()
      .bytes("document_hash", document_hash)
      .i64("time", time)
      .u64("serial", serial)
      .str("tsa_id", tsa_id)
      .finish();
}

Bytes TimestampToken::encode() const { return encode_list({tbs(), signature}); }

TimestampToken TimestampToken::decode(ByteView encoded) {
  const auto parts = decode_list(encoded);
  if (parts.size() != 2) throw Error("decode-error", "timestamp token must hold tbs and signature");
  RecordReader r(parts[0]);
  TimestampToken t{r.bytes("document_hash"), r.i64("time"), r.u64("serial"), r.str("tsa_id"), parts[1]};
  if (t.tbs() != parts[0]) throw Error("decode-error", "timestamp tbs is not canonical");
  return t;
}

bool TimestampToken::verify(const Certificate& tsa_certificate) const {
  if (tsa_certificate.fields.subject_id != tsa_id || document_hash.size() != kHashSize) return false;
  try {
    return verify_message(tsa_certificate.fields.scheme_id, tsa_certificate.fields.public_key, tbs(), signature);
  } catch (const Error&) {
    return false;
  }
}

TimestampAuthority::TimestampAuthority(Certificate certificate, KeyPair key, std::uint64_t last_serial,
                                       UnixTime last_time)
    : certificate_(std::move(certificate)), key_(std::move(key)), last_serial_(last_serial), last_time_(last_time) {}

TimestampToken TimestampAuthority::issue(ByteView document_hash, UnixTime now) {
  if (document_hash.size() != kHashSize) throw Error("request-malformed", "document hash must be 32 bytes");
  std::lock_guard lock(mutex_);
  TimestampToken token;
  token.document_hash.assign(document_hash.begin(), document_hash.end());
  token.time = std::max(now, last_time_);
  token.serial = last_serial_ + 1;
  token.tsa_id = certificate_.fields.subject_id;
  token.signature = sign_message(key_, token.tbs());
  last_serial_ = token.serial;
  last_time_ = token.time;
  return token;
}

void TimestampAuthority::restore(std::uint64_t serial, UnixTime time) {
  std::lock_guard lock(mutex_);
  last_serial_ = std::max(last_serial_, serial);
  last_time_ = std::max(last_time_, time);
}

std::uint64_t TimestampAuthority::last_serial() const {
  std::lock_guard lock(mutex_);
  return last_serial_;
}

}  // namespace eidpki::revocation
