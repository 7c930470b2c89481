#include "eidpki/revocation/ocsp.hpp"

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki::revocation {

namespace {

RevocationStatus status_from_string(std::string_view name) {
  if (name == "good") return RevocationStatus::good;
  if (name == "revoked") return RevocationStatus::revoked;
  if (name == "unknown") return RevocationStatus::unknown;
  throw Error("decode-error", "unknown ocsp status " + std::string(name));
}

}  // namespace

Bytes OcspRequest::encode() const {
  return RecordWriter().str("ca_id", ca_id).u64("serial", serial).bytes("nonce", nonce).finish();
}

OcspRequest OcspRequest::decode(ByteView encoded) {
  RecordReader r(encoded);
  return OcspRequest{r.str("ca_id"), r.u64("serial"), r.bytes("nonce")};
}

OcspRequest OcspRequest::make(std::string ca_id, std::uint64_t serial, Random& rng) {
  return OcspRequest{std::move(ca_id), serial, rng.bytes(kOcspNonceSize)};
}

Bytes OcspResponse::tbs() const {
  RecordWriter w;
  w.str("ca_id", ca_id).u64("serial", serial).i64("produced_at", produced_at).bytes("nonce", nonce);
  w.u64("state_version", state_version);
  if (status) w.str("status", to_string(*status));
  if (revoked_at) w.i64("revoked_at", *revoked_at);
  if (!error.empty()) w.str("error", error);
  return w.finish();
}

Bytes OcspResponse::encode() const { return encode_list({tbs(), signature}); }

OcspResponse OcspResponse::decode(ByteView encoded) {
  const auto parts = decode_list(encoded);
  if (parts.size() != 2) throw Error("decode-error", "ocsp response must hold tbs and signature");
  RecordReader r(parts[0]);
  OcspResponse resp;
  resp.ca_id = r.str("ca_id");
  resp.serial = r.u64("serial");
  resp.produced_at = r.i64("produced_at");
  resp.nonce = r.bytes("nonce");
  resp.state_version = r.u64("state_version");
  if (r.has("status")) resp.status = status_from_string(r.str("status"));
  if (r.has("revoked_at")) resp.revoked_at = r.i64("revoked_at");
  if (r.has("error")) resp.error = r.str("error");
  resp.signature = parts[1];
  if (resp.tbs() != parts[0]) throw Error("decode-error", "ocsp tbs is not canonical");
  return resp;
}

OcspResponse ocsp_respond(const OcspRequest& request, const RevocationState& state, const IssuedIndex& index,
                          const KeyPair& responder_key, UnixTime at_time) {
  OcspResponse resp;
  resp.ca_id = state.ca_id();
  resp.serial = request.serial;
  resp.produced_at = at_time;
  resp.nonce = request.nonce;
  resp.state_version = state.version();
  if (request.nonce.size() != kOcspNonceSize || request.ca_id.empty() || request.serial == 0) {
    resp.error = "malformed";
  } else if (request.ca_id != state.ca_id()) {
    resp.status = RevocationStatus::unknown;
  } else {
    switch (classify(request.serial, state, index, at_time)) {
      case SerialState::valid:
        resp.status = RevocationStatus::good;
        break;
      case SerialState::revoked:
        resp.status = RevocationStatus::revoked;
        resp.revoked_at = state.find(request.serial)->revoked_at;
        break;
      case SerialState::expired:
      case SerialState::not_yet_valid:
      case SerialState::never_issued:
        resp.status = RevocationStatus::unknown;
        break;
    }
  }
  resp.signature = sign_message(responder_key, resp.tbs());
  return resp;
}

RevocationStatus accept_ocsp_response(const OcspRequest& request, const OcspResponse& response,
                                      const IssuerKey& responder) {
  bool signature_ok = false;
  try {
    signature_ok = verify_message(responder.scheme_id, responder.public_key, response.tbs(), response.signature);
  } catch (const Error&) {
  }
  if (!signature_ok || response.ca_id != responder.issuer_id) {
    throw Error("ocsp-invalid", "responder signature does not verify");
  }
  if (!constant_time_equal(response.nonce, request.nonce)) throw Error("ocsp-invalid", "nonce mismatch");
  if (response.serial != request.serial) throw Error("ocsp-invalid", "serial mismatch");
  if (!response.status) throw Error("ocsp-error", response.error.empty() ? "no status" : response.error);
  return *response.status;
}

}  // namespace eidpki::revocation
