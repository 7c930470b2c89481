#include "eidpki/enrollment/wire.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "eidpki/core/error.hpp"

namespace eidpki::enrollment {

WireRequest parse_request(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const std::size_t space = line.find(' ');
  if (space == std::string_view::npos || space == 0) throw Error("malformed", "expected '<op> <object>'");
  WireRequest req;
  req.op = std::string(line.substr(0, space));
  for (char c : req.op) {
    if (c <= ' ' || c == 0x7f) throw Error("malformed", "bad character in op name");
  }
  try {
    req.body = Json::parse(line.substr(space + 1));
  } catch (const Json::exception& e) {
    throw Error("malformed", std::string("body is not JSON: ") + e.what());
  }
  if (!req.body.is_object()) throw Error("malformed", "body must be an object");
  return req;
}

namespace {

std::string dump(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::replace); }

}  // namespace

std::string format_request(std::string_view op, const Json& body) { return std::string(op) + " " + dump(body); }

std::string format_ok(const Json& body) { return "ok " + dump(body); }

std::string format_err(std::string_view code, std::string_view message) {
  return "err " + dump(Json{{"code", std::string(code)}, {"message", std::string(message)}});
}

WireResponse parse_response(std::string_view line) {
  WireResponse r;
  const std::size_t space = line.find(' ');
  if (space == std::string_view::npos) throw Error("malformed", "response without body");
  const std::string_view status = line.substr(0, space);
  if (status != "ok" && status != "err") throw Error("malformed", "response status " + std::string(status));
  r.ok = status == "ok";
  try {
    r.body = Json::parse(line.substr(space + 1));
  } catch (const Json::exception& e) {
    throw Error("malformed", std::string("response body: ") + e.what());
  }
  return r;
}

std::pair<std::string, std::uint16_t> parse_address(std::string_view address) {
  const std::size_t colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw Error("usage", "address must be host:port");
  const std::string port_text(address.substr(colon + 1));
  char* end = nullptr;
  const unsigned long port = std::strtoul(port_text.c_str(), &end, 10);
  if (port_text.empty() || *end != '\0' || port > 65535) throw Error("usage", "bad port in " + std::string(address));
  return {std::string(address.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

Json transcript_json(const std::vector<toolkit::TranscriptStep>& steps) {
  Json out = Json::array();
  for (const toolkit::TranscriptStep& s : steps) {
    out.push_back(Json{{"step", s.step}, {"passed", s.passed}, {"detail", s.detail}});
  }
  return out;
}

Json verification_json(const toolkit::SignatureVerification& v) {
  return Json{{"verdict", to_string(v.outcome.verdict)},
              {"checked_at", v.outcome.checked_at},
              {"source", to_string(v.outcome.revocation_source)},
              {"detail", v.outcome.detail},
              {"transcript", transcript_json(v.transcript)}};
}

toolkit::SignatureVerification verification_from_json(const Json& j) {
  toolkit::SignatureVerification v;
  v.outcome.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  v.outcome.checked_at = j.at("checked_at").get<UnixTime>();
  const std::string source = j.at("source").get<std::string>();
  for (RevocationSource s : {RevocationSource::crl, RevocationSource::pcl, RevocationSource::ocsp}) {
    if (to_string(s) == source) v.outcome.revocation_source = s;
  }
  v.outcome.detail = j.at("detail").get<std::string>();
  for (const Json& s : j.at("transcript")) {
    v.transcript.push_back({s.at("step").get<std::string>(), s.at("passed").get<bool>(),
                            s.at("detail").get<std::string>()});
  }
  return v;
}

WireClient::WireClient(std::string_view address) {
  const auto [host, port] = parse_address(address);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string port_text = std::to_string(port);
  if (::getaddrinfo(host.c_str(), port_text.c_str(), &hints, &found) != 0 || found == nullptr) {
    throw Error("validation-unavailable", "cannot resolve " + host);
  }
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(found);
  if (fd_ < 0) throw Error("validation-unavailable", "cannot connect to " + std::string(address));
}

WireClient::~WireClient() {
  if (fd_ >= 0) ::close(fd_);
}

std::string WireClient::exchange_line(std::string_view line) {
  if (fd_ < 0) throw Error("validation-unavailable", "connection closed");
  std::string out(line);
  out.push_back('\n');
  std::size_t sent = 0;
  while (sent < out.size()) {
    const ssize_t n = ::send(fd_, out.data() + sent, out.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("validation-unavailable", std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
  for (;;) {
    const std::size_t nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string response = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return response;
    }
    char chunk[65536];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      ::close(fd_);
      fd_ = -1;
      throw Error("validation-unavailable", "service closed the connection");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

Json WireClient::call(std::string_view op, const Json& body) {
  const WireResponse r = parse_response(exchange_line(format_request(op, body)));
  if (!r.ok) {
    throw Error(r.body.value("code", "internal"), r.body.value("message", ""));
  }
  return r.body;
}

revocation::OcspResponse RemoteServices::ocsp_check(const revocation::OcspRequest& request) {
  const Json r = client_.call("ocsp.check", Json{{"request", to_hex(request.encode())}});
  return revocation::OcspResponse::decode(from_hex(r.at("response").get<std::string>()));
}

revocation::Crl RemoteServices::crl_fetch(std::string_view ca_id) {
  const Json r = client_.call("crl.fetch", Json{{"ca_id", std::string(ca_id)}});
  return revocation::Crl::decode(from_hex(r.at("crl").get<std::string>()));
}

revocation::Pcl RemoteServices::pcl_fetch(std::string_view ca_id) {
  const Json r = client_.call("pcl.fetch", Json{{"ca_id", std::string(ca_id)}});
  return revocation::Pcl::decode(from_hex(r.at("pcl").get<std::string>()));
}

toolkit::SignatureVerification RemoteServices::validate_signature(const toolkit::SignatureCheckRequest& request) {
  const Json r = client_.call("validate.signature", Json{{"document_hash", to_hex(request.document_hash)},
                                                         {"signature", to_hex(request.signature)},
                                                         {"signer_issuer_id", request.signer_issuer_id},
                                                         {"signer_serial", request.signer_serial}});
  return verification_from_json(r);
}

std::optional<Certificate> RemoteServices::repo_fetch(std::string_view issuer_id, std::uint64_t serial) {
  const Json r = client_.call("repo.fetch", Json{{"issuer_id", std::string(issuer_id)}, {"serial", serial}});
  const Json& certs = r.at("certificates");
  if (certs.empty()) return std::nullopt;
  return Certificate::from_armor(certs.front().get<std::string>());
}

revocation::TimestampToken RemoteServices::tsa_stamp(ByteView document_hash) {
  const Json r = client_.call("tsa.stamp", Json{{"hash", to_hex(document_hash)}});
  return revocation::TimestampToken::decode(from_hex(r.at("token").get<std::string>()));
}

}  // namespace eidpki::enrollment
