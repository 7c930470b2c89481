#include "eidpki/enrollment/audit_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/crypto.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki::enrollment {

std::string AuditEvent::to_line() const {
  Json j = {{"sequence", sequence}, {"time", time},       {"actor", actor},
            {"action", action},     {"subject", subject}, {"payload", payload},
            {"payload_hash", payload_hash}};
  return j.dump();
}

AuditEvent AuditEvent::from_line(std::string_view line) {
  try {
    const Json j = Json::parse(line);
    AuditEvent e;
    e.sequence = j.at("sequence").get<std::uint64_t>();
    e.time = j.at("time").get<UnixTime>();
    e.actor = j.at("actor").get<std::string>();
    e.action = j.at("action").get<std::string>();
    e.subject = j.at("subject").get<std::string>();
    e.payload = j.at("payload");
    e.payload_hash = j.at("payload_hash").get<std::string>();
    return e;
  } catch (const Json::exception& ex) {
    throw Error("audit-corrupt", std::string("unreadable event: ") + ex.what());
  }
}

std::string chain_hash(std::string_view previous_hash, const AuditEvent& event) {
  Bytes data = from_hex(previous_hash);
  append_u64(data, event.sequence);
  append_u64(data, static_cast<std::uint64_t>(event.time));
  append(data, length_prefixed(to_bytes(event.actor)));
  append(data, length_prefixed(to_bytes(event.action)));
  append(data, length_prefixed(to_bytes(event.subject)));
  append(data, length_prefixed(to_bytes(event.payload.dump())));
  return to_hex(sha256(data));
}

AuditVerification verify_events(const std::vector<AuditEvent>& events) {
  AuditVerification v;
  std::string previous = kGenesisHash;
  for (const AuditEvent& e : events) {
    const std::uint64_t expected = v.events + 1;
    if (e.sequence != expected) {
      v.ok = false;
      v.error = "line " + std::to_string(expected) + ": sequence " + std::to_string(e.sequence) + ", expected " +
                std::to_string(expected);
      return v;
    }
    if (chain_hash(previous, e) != e.payload_hash) {
      v.ok = false;
      v.error = "line " + std::to_string(expected) + ": hash chain broken";
      return v;
    }
    previous = e.payload_hash;
    ++v.events;
  }
  return v;
}

namespace {

struct FileLines {
  std::vector<std::string> lines;
  std::size_t complete_bytes = 0;  // up to and including the last newline
  bool torn = false;
};

FileLines read_lines(const std::filesystem::path& path) {
  FileLines out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string data = buffer.str();
  std::size_t start = 0;
  while (start < data.size()) {
    const std::size_t nl = data.find('\n', start);
    if (nl == std::string::npos) {
      out.torn = true;
      break;
    }
    out.lines.push_back(data.substr(start, nl - start));
    start = nl + 1;
    out.complete_bytes = start;
  }
  return out;
}

std::vector<AuditEvent> parse_lines(const std::vector<std::string>& lines) {
  std::vector<AuditEvent> events;
  events.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      events.push_back(AuditEvent::from_line(lines[i]));
    } catch (const Error& e) {
      throw Error("audit-corrupt", "line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return events;
}

void sync_directory(const std::filesystem::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

AuditVerification verify_audit_file(const std::filesystem::path& path) {
  const FileLines file = read_lines(path);
  try {
    AuditVerification v = verify_events(parse_lines(file.lines));
    if (v.ok && file.torn) v.error = "torn final line (ignored)";
    return v;
  } catch (const Error& e) {
    return AuditVerification{false, 0, e.what()};
  }
}

std::vector<AuditEvent> read_audit_events(const std::filesystem::path& path) {
  std::vector<AuditEvent> events = parse_lines(read_lines(path).lines);
  const AuditVerification v = verify_events(events);
  if (!v.ok) throw Error("audit-corrupt", v.error);
  return events;
}

AuditLog AuditLog::open(const std::filesystem::path& path, std::vector<AuditEvent>* replay) {
  AuditLog log;
  log.path_ = path;
  const bool existed = std::filesystem::exists(path);
  const FileLines file = read_lines(path);
  std::vector<AuditEvent> events = parse_lines(file.lines);
  const AuditVerification v = verify_events(events);
  if (!v.ok) throw Error("audit-corrupt", v.error);

  log.fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0600);
  if (log.fd_ < 0) throw Error("io-error", "cannot open " + path.string() + ": " + std::strerror(errno));
  if (file.torn) {
    if (::ftruncate(log.fd_, static_cast<off_t>(file.complete_bytes)) != 0 || ::fsync(log.fd_) != 0) {
      throw Error("io-error", "cannot truncate torn audit tail");
    }
    log.repaired_tail_ = true;
  }
  if (!existed) sync_directory(path.parent_path());
  if (!events.empty()) {
    log.last_sequence_ = events.back().sequence;
    log.last_hash_ = events.back().payload_hash;
  }
  if (replay) *replay = std::move(events);
  return log;
}

AuditLog::AuditLog(AuditLog&& other) noexcept { *this = std::move(other); }

AuditLog& AuditLog::operator=(AuditLog&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    path_ = std::move(other.path_);
    fd_ = other.fd_;
    last_sequence_ = other.last_sequence_;
    last_hash_ = std::move(other.last_hash_);
    repaired_tail_ = other.repaired_tail_;
    other.fd_ = -1;
  }
  return *this;
}

AuditLog::~AuditLog() {
  if (fd_ >= 0) ::close(fd_);
}

AuditEvent AuditLog::append(UnixTime time, std::string actor, std::string action, std::string subject, Json payload) {
  if (fd_ < 0) throw Error("io-error", "audit log is closed");
  AuditEvent e;
  e.sequence = last_sequence_ + 1;
  e.time = time;
  e.actor = std::move(actor);
  e.action = std::move(action);
  e.subject = std::move(subject);
  e.payload = std::move(payload);
  e.payload_hash = chain_hash(last_hash_, e);

  const std::string line = e.to_line() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("io-error", std::string("audit append failed: ") + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fdatasync(fd_) != 0) throw Error("io-error", std::string("audit sync failed: ") + std::strerror(errno));
  last_sequence_ = e.sequence;
  last_hash_ = e.payload_hash;
  return e;
}

}  // namespace eidpki::enrollment
