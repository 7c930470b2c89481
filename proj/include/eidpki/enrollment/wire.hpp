#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "eidpki/enrollment/audit_log.hpp"
#include "eidpki/toolkit/services.hpp"

namespace eidpki::enrollment {

// Line protocol.
//   request:  <op> SP <json object>
//   response: ok SP <json object> | err SP {"code":..,"message":..}
// Objects are serialized with sorted keys and no whitespace, so equal
// content gives equal bytes.
inline constexpr std::size_t kMaxLineBytes = 1 << 20;

struct WireRequest {
  std::string op;
  Json body = Json::object();
};

// Throws Error("malformed").
WireRequest parse_request(std::string_view line);
std::string format_request(std::string_view op, const Json& body);
std::string format_ok(const Json& body);
std::string format_err(std::string_view code, std::string_view message);

struct WireResponse {
  bool ok = false;
  Json body = Json::object();
};
WireResponse parse_response(std::string_view line);

// host:port; throws Error("usage") on anything else.
std::pair<std::string, std::uint16_t> parse_address(std::string_view address);

// JSON forms shared by server and client.
Json transcript_json(const std::vector<toolkit::TranscriptStep>& steps);
Json verification_json(const toolkit::SignatureVerification& v);
toolkit::SignatureVerification verification_from_json(const Json& j);

// Blocking client holding one connection.
class WireClient {
 public:
  // Throws Error("validation-unavailable") if the service cannot be reached.
  explicit WireClient(std::string_view address);
  ~WireClient();
  WireClient(const WireClient&) = delete;
  WireClient& operator=(const WireClient&) = delete;

  // Sends one raw line, returns the raw response line (no newline).
  std::string exchange_line(std::string_view line);
  // ok body, or throws Error(code, message) for err responses.
  Json call(std::string_view op, const Json& body);

 private:
  int fd_ = -1;
  std::string buffer_;
};

// ValidationServices over the wire.
class RemoteServices : public toolkit::ValidationServices {
 public:
  explicit RemoteServices(std::string_view address) : client_(address) {}

  revocation::OcspResponse ocsp_check(const revocation::OcspRequest& request) override;
  revocation::Crl crl_fetch(std::string_view ca_id) override;
  revocation::Pcl pcl_fetch(std::string_view ca_id) override;
  toolkit::SignatureVerification validate_signature(const toolkit::SignatureCheckRequest& request) override;
  std::optional<Certificate> repo_fetch(std::string_view issuer_id, std::uint64_t serial) override;
  revocation::TimestampToken tsa_stamp(ByteView document_hash) override;

  WireClient& client() { return client_; }

 private:
  WireClient client_;
};

}  // namespace eidpki::enrollment
