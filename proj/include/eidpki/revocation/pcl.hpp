#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eidpki/core/path.hpp"
#include "eidpki/revocation/ledger.hpp"

namespace eidpki::revocation {

// Contiguous serial run [first, first + count).
struct SerialRange {
  std::uint64_t first = 0;
  std::uint64_t count = 0;

  friend bool operator==(const SerialRange&, const SerialRange&) = default;
};

std::vector<SerialRange> compress_ranges(const std::vector<std::uint64_t>& sorted_serials);
std::vector<std::uint64_t> expand_ranges(const std::vector<SerialRange>& ranges);

// Positive Certification List: the serials currently good. The wire form
// carries run-length ranges; valid_serials is the expanded view.
struct Pcl {
  std::string ca_id;
  UnixTime as_of = 0;
  std::uint64_t state_version = 0;
  std::vector<std::uint64_t> valid_serials;  // ascending
  Bytes signature;

  Bytes tbs() const;
  Bytes encode() const;
  static Pcl decode(ByteView encoded);
  bool verify(const IssuerKey& ca_key) const;
  bool contains(std::uint64_t serial) const;
};

Pcl generate_pcl(const RevocationState& state, const IssuedIndex& index, const KeyPair& ca_key, UnixTime at_time);

// Caches the signed PCL per ledger version and as_of time; regenerated on
// demand when either changes.
class PclCache {
 public:
  const Pcl& get(const RevocationState& state, const IssuedIndex& index, const KeyPair& ca_key, UnixTime at_time);

 private:
  bool filled_ = false;
  std::size_t issued_count_ = 0;
  Pcl cached_;
};

}  // namespace eidpki::revocation
