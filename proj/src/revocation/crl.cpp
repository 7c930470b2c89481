#include "eidpki/revocation/crl.hpp"

#include <algorithm>

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki::revocation {

Bytes Crl::tbs() const {
  std::vector<Bytes> items;
  items.reserve(entries.size());
  for (const CrlEntry& e : entries) {
    items.push_back(RecordWriter()
                        .u64("serial", e.serial)
                        .str("reason", to_string(e.reason))
                        .i64("revoked_at", e.revoked_at)
                        .finish());
  }
  return RecordWriter()
      .str("ca_id", ca_id)
      .i64("this_update", this_update)
      .i64("next_update", next_update)
      .u64("state_version", state_version)
      .bytes("entries", encode_list(items))
      .finish();
}

Bytes Crl::encode() const { return encode_list({tbs(), signature}); }

Crl Crl::decode(ByteView encoded) {
  const auto parts = decode_list(encoded);
  if (parts.size() != 2) throw Error("decode-error", "crl must hold tbs and signature");
  RecordReader r(parts[0]);
  Crl crl;
  crl.ca_id = r.str("ca_id");
  crl.this_update = r.i64("this_update");
  crl.next_update = r.i64("next_update");
  crl.state_version = r.u64("state_version");
  for (const Bytes& item : decode_list(r.bytes("entries"))) {
    RecordReader e(item);
    crl.entries.push_back(CrlEntry{e.u64("serial"), reason_from_string(e.str("reason")), e.i64("revoked_at")});
  }
  crl.signature = parts[1];
  if (crl.tbs() != parts[0]) throw Error("decode-error", "crl tbs is not canonical");
  return crl;
}

bool Crl::verify(const IssuerKey& ca_key) const {
  if (ca_key.issuer_id != ca_id) return false;
  if (!std::is_sorted(entries.begin(), entries.end(),
                      [](const CrlEntry& a, const CrlEntry& b) { return a.serial < b.serial; })) {
    return false;
  }
  try {
    return verify_message(ca_key.scheme_id, ca_key.public_key, tbs(), signature);
  } catch (const Error&) {
    return false;
  }
}

const CrlEntry* Crl::find(std::uint64_t serial) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), serial,
                             [](const CrlEntry& e, std::uint64_t s) { return e.serial < s; });
  if (it == entries.end() || it->serial != serial) return nullptr;
  return &*it;
}

Crl generate_crl(const RevocationState& state, const IssuedIndex& index, const KeyPair& ca_key, UnixTime at_time,
                 UnixTime validity_window_seconds) {
  if (validity_window_seconds <= 0) throw Error("invalid-argument", "CRL validity window must be positive");
  Crl crl;
  crl.ca_id = state.ca_id();
  crl.this_update = at_time;
  crl.next_update = at_time + validity_window_seconds;
  crl.state_version = state.version();
  for (const auto& [serial, entry] : state.entries()) {
    if (classify(serial, state, index, at_time) == SerialState::revoked) {
      crl.entries.push_back(CrlEntry{serial, entry.reason, entry.revoked_at});
    }
  }
  crl.signature = sign_message(ca_key, crl.tbs());
  return crl;
}

RevocationStatus check_status_via_crl(std::uint64_t serial, const Crl& crl, const Certificate* issued_cert,
                                      const IssuerKey& ca_key, UnixTime at_time) {
  if (!crl.verify(ca_key)) throw Error("crl-invalid", "CRL signature does not verify for " + ca_key.issuer_id);
  if (at_time > crl.next_update) throw Error("crl-stale", "CRL for " + crl.ca_id + " is past next_update");
  if (crl.find(serial) != nullptr) return RevocationStatus::revoked;
  if (issued_cert == nullptr || issued_cert->fields.serial != serial || issued_cert->fields.issuer_id != crl.ca_id) {
    return RevocationStatus::unknown;
  }
  return issued_cert->valid_at(at_time) ? RevocationStatus::good : RevocationStatus::unknown;
}

}  // namespace eidpki::revocation
