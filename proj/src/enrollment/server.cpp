#include "eidpki/enrollment/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <functional>
#include <map>

#include "eidpki/core/error.hpp"

namespace eidpki::enrollment {

namespace {

const Json& field(const Json& body, const char* name) {
  if (!body.contains(name)) throw Error("malformed", std::string("missing field ") + name);
  return body.at(name);
}

std::string str_field(const Json& body, const char* name) {
  const Json& v = field(body, name);
  if (!v.is_string()) throw Error("malformed", std::string(name) + " must be a string");
  return v.get<std::string>();
}

std::uint64_t u64_field(const Json& body, const char* name) {
  const Json& v = field(body, name);
  if (!v.is_number_unsigned()) throw Error("malformed", std::string(name) + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

Bytes hex_field(const Json& body, const char* name) {
  try {
    return from_hex(str_field(body, name));
  } catch (const Error& e) {
    if (e.code() == "malformed") throw;
    throw Error("malformed", std::string(name) + " must be hex");
  }
}

enum class Access { read, write };

}  // namespace

const std::vector<std::string>& Dispatcher::operations() {
  static const std::vector<std::string> ops{"cert.issue",      "crl.fetch",     "gateway.block", "gateway.check",
                                            "gateway.unblock", "ocsp.check",    "pcl.fetch",     "repo.fetch",
                                            "revoke",          "tsa.stamp",     "validate.signature"};
  return ops;
}

std::string Dispatcher::handle(std::string_view line) {
  try {
    const WireRequest req = parse_request(line);
    return format_ok(dispatch(req));
  } catch (const Error& e) {
    return format_err(e.code(), e.what());
  } catch (const Json::exception& e) {
    return format_err("malformed", e.what());
  } catch (const std::exception& e) {
    return format_err("internal", e.what());
  }
}

Json Dispatcher::dispatch(const WireRequest& req) {
  const std::string& op = req.op;
  const Json& b = req.body;
  const auto& ops = operations();
  if (std::find(ops.begin(), ops.end(), op) == ops.end()) throw Error("unknown-op", op);

  const bool writes = op == "cert.issue" || op == "gateway.block" || op == "gateway.unblock" || op == "pcl.fetch" ||
                      op == "revoke" || op == "tsa.stamp";
  std::unique_lock<std::shared_mutex> exclusive(mutex_, std::defer_lock);
  std::shared_lock<std::shared_mutex> shared(mutex_, std::defer_lock);
  if (writes) {
    exclusive.lock();
  } else {
    shared.lock();
  }

  Authority& a = authority_;
  Json out = Json::object();
  if (op == "ocsp.check") {
    const revocation::OcspRequest request = revocation::OcspRequest::decode(hex_field(b, "request"));
    out["response"] = to_hex(a.services().ocsp_check(request).encode());
  } else if (op == "crl.fetch") {
    out["crl"] = to_hex(a.services().crl_fetch(str_field(b, "ca_id")).encode());
  } else if (op == "pcl.fetch") {
    out["pcl"] = to_hex(a.services().pcl_fetch(str_field(b, "ca_id")).encode());
  } else if (op == "gateway.block") {
    const revocation::BlockMode mode = revocation::block_mode_from_string(str_field(b, "mode"));
    std::optional<UnixTime> until;
    if (b.contains("until")) until = static_cast<UnixTime>(u64_field(b, "until"));
    const revocation::HotlistEntry e = a.gateway_block(str_field(b, "card_id"), mode, until);
    out["mode"] = to_string(e.block);
    out["since"] = e.since;
    if (e.until) out["until"] = *e.until;
  } else if (op == "gateway.unblock") {
    out["removed"] = a.gateway_unblock(str_field(b, "card_id")).has_value();
  } else if (op == "gateway.check") {
    out["decision"] = to_string(a.gateway_check(str_field(b, "card_id")));
  } else if (op == "tsa.stamp") {
    out["token"] = to_hex(a.tsa_stamp(hex_field(b, "hash")).encode());
  } else if (op == "validate.signature") {
    const toolkit::SignatureCheckRequest request{hex_field(b, "document_hash"), hex_field(b, "signature"),
                                                 str_field(b, "signer_issuer_id"), u64_field(b, "signer_serial")};
    out = verification_json(a.services().validate_signature(request));
  } else if (op == "repo.fetch") {
    Json certs = Json::array();
    if (b.contains("subject_id")) {
      for (const Certificate& c : a.repository().fetch_by_subject(str_field(b, "subject_id"))) {
        certs.push_back(c.armor());
      }
    } else {
      if (auto c = a.repository().find(str_field(b, "issuer_id"), u64_field(b, "serial"))) certs.push_back(c->armor());
    }
    out["certificates"] = certs;
  } else if (op == "revoke") {
    const ca::RevocationAck ack =
        a.revoke(str_field(b, "ca_id"), u64_field(b, "serial"), revocation::reason_from_string(str_field(b, "reason")));
    out["newly_recorded"] = ack.newly_recorded;
    out["reason"] = to_string(ack.entry.reason);
    out["revoked_at"] = ack.entry.revoked_at;
  } else if (op == "cert.issue") {
    ca::IssueRequest request;
    request.subject_id = str_field(b, "subject_id");
    request.profile = profile_from_string(str_field(b, "profile"));
    request.public_key = hex_field(b, "public_key");
    if (b.contains("validity_days")) request.validity_days = static_cast<int>(u64_field(b, "validity_days"));
    const ca::Issuance issuance = a.issue_certificate(str_field(b, "ca_id"), request);
    out["certificate"] = issuance.certificate.armor();
    out["serial"] = issuance.certificate.fields.serial;
  }
  out["version"] = a.version();
  return out;
}

// ---- TCP ---------------------------------------------------------------

Server::~Server() { stop(); }

std::uint16_t Server::bind(std::string_view host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* found = nullptr;
  const std::string host_text(host);
  const std::string port_text = std::to_string(port);
  if (::getaddrinfo(host_text.c_str(), port_text.c_str(), &hints, &found) != 0 || found == nullptr) {
    throw Error("usage", "cannot resolve " + host_text);
  }
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    listen_fd_ = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (listen_fd_ < 0) continue;
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listen_fd_, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(listen_fd_, 64) == 0) break;
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  ::freeaddrinfo(found);
  if (listen_fd_ < 0) throw Error("io-error", "cannot listen on " + host_text + ":" + port_text);

  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  if (addr.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

void Server::run() {
  while (!stopping_) {
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      break;
    }
    std::lock_guard lock(connections_mutex_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    connections_.push_back(fd);
    threads_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(connections_mutex_);
    for (int fd : connections_) ::shutdown(fd, SHUT_RDWR);
    threads.swap(threads_);
  }
  for (std::thread& t : threads) {
    if (t.joinable()) t.join();
  }
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
}

namespace {

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

void Server::serve_connection(int fd) {
  std::string buffer;
  char chunk[65536];
  bool open = true;
  while (open) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (;;) {
      const std::size_t nl = buffer.find('\n', start);
      if (nl == std::string::npos) break;
      if (nl - start > kMaxLineBytes) {
        send_all(fd, format_err("too-large", "request line exceeds 1 MiB") + "\n");
        open = false;
        break;
      }
      const std::string response = dispatcher_.handle(std::string_view(buffer).substr(start, nl - start));
      if (!send_all(fd, response + "\n")) {
        open = false;
        break;
      }
      start = nl + 1;
    }
    buffer.erase(0, start);
    if (open && buffer.size() > kMaxLineBytes) {
      send_all(fd, format_err("too-large", "request line exceeds 1 MiB") + "\n");
      open = false;
    }
  }
  {
    std::lock_guard lock(connections_mutex_);
    connections_.erase(std::remove(connections_.begin(), connections_.end(), fd), connections_.end());
  }
  ::close(fd);
}

}  // namespace eidpki::enrollment
