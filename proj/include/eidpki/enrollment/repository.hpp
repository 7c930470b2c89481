#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "eidpki/core/path.hpp"

namespace eidpki::enrollment {

// Where certificates are published. Holds CA and end-entity certificates,
// each verified against its issuer's certificate (or its own key, for a
// self-signed root) before it is accepted.
class Repository : public CertificateDirectory {
 public:
  // Throws Error("duplicate-serial") for an (issuer, serial) already stored
  // and Error("invalid-signature") if the issuer is unknown or the
  // signature does not verify.
  void store(const Certificate& cert);

  std::optional<Certificate> find(std::string_view issuer_id, std::uint64_t serial) const override;
  std::optional<Certificate> find_ca(std::string_view subject_id) const override;
  // Ascending by serial, then issuer.
  std::vector<Certificate> fetch_by_subject(std::string_view subject_id) const;

  std::size_t size() const { return by_serial_.size(); }
  const std::map<std::pair<std::string, std::uint64_t>, Certificate>& all() const { return by_serial_; }

 private:
  std::map<std::pair<std::string, std::uint64_t>, Certificate> by_serial_;
  std::map<std::string, std::set<std::pair<std::uint64_t, std::string>>, std::less<>> by_subject_;
  std::map<std::string, std::pair<std::string, std::uint64_t>, std::less<>> ca_by_subject_;
};

}  // namespace eidpki::enrollment
