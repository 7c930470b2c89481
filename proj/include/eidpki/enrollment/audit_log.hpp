#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eidpki/core/bytes.hpp"
#include "json.hpp"

namespace eidpki::enrollment {

using Json = nlohmann::json;

// One line of audit.log. payload_hash covers the previous event's hash and
// every field of this one, so the file forms a hash chain.
struct AuditEvent {
  std::uint64_t sequence = 0;
  UnixTime time = 0;
  std::string actor;
  std::string action;
  std::string subject;
  Json payload = Json::object();
  std::string payload_hash;  // hex

  std::string to_line() const;  // without the trailing newline
  static AuditEvent from_line(std::string_view line);
};

// Chain step: SHA-256 over the previous hash and the event's fields.
std::string chain_hash(std::string_view previous_hash, const AuditEvent& event);
inline const std::string kGenesisHash(64, '0');

struct AuditVerification {
  bool ok = true;
  std::uint64_t events = 0;
  std::string error;  // first problem found, with its line number
};

// Checks sequence continuity from 1 and every link of the chain.
AuditVerification verify_events(const std::vector<AuditEvent>& events);
AuditVerification verify_audit_file(const std::filesystem::path& path);

// Read-only load for processes that must not repair the file: a torn final
// line is skipped, a broken chain throws Error("audit-corrupt").
std::vector<AuditEvent> read_audit_events(const std::filesystem::path& path);

// Append-only, fsync'd event log. Opening drops a torn final line (a crash
// in mid-write) and refuses a file whose chain is broken elsewhere.
class AuditLog {
 public:
  // Throws Error("audit-corrupt").
  static AuditLog open(const std::filesystem::path& path, std::vector<AuditEvent>* replay = nullptr);

  AuditLog(AuditLog&& other) noexcept;
  AuditLog& operator=(AuditLog&& other) noexcept;
  AuditLog(const AuditLog&) = delete;
  AuditLog& operator=(const AuditLog&) = delete;
  ~AuditLog();

  // Durable once this returns.
  AuditEvent append(UnixTime time, std::string actor, std::string action, std::string subject, Json payload);

  std::uint64_t last_sequence() const { return last_sequence_; }
  const std::string& last_hash() const { return last_hash_; }
  bool repaired_tail() const { return repaired_tail_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  AuditLog() = default;

  std::filesystem::path path_;
  int fd_ = -1;
  std::uint64_t last_sequence_ = 0;
  std::string last_hash_ = kGenesisHash;
  bool repaired_tail_ = false;
};

}  // namespace eidpki::enrollment
