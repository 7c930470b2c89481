#include "eidpki/revocation/pcl.hpp"

#include <algorithm>

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki::revocation {

std::vector<SerialRange> compress_ranges(const std::vector<std::uint64_t>& sorted_serials) {
  std::vector<SerialRange> ranges;
  for (std::uint64_t s : sorted_serials) {
    if (!ranges.empty() && ranges.back().first + ranges.back().count == s) {
      ++ranges.back().count;
    } else {
      ranges.push_back(SerialRange{s, 1});
    }
  }
  return ranges;
}

std::vector<std::uint64_t> expand_ranges(const std::vector<SerialRange>& ranges) {
  std::vector<std::uint64_t> out;
  for (const SerialRange& r : ranges) {
    for (std::uint64_t i = 0; i < r.count; ++i) out.push_back(r.first + i);
  }
  return out;
}

Bytes Pcl::tbs() const {
  Bytes ranges;
  for (const SerialRange& r : compress_ranges(valid_serials)) {
    append_u64(ranges, r.first);
    append_u64(ranges, r.count);
  }
  return RecordWriter()
      .str("ca_id", ca_id)
      .i64("as_of", as_of)
      .u64("state_version", state_version)
      .bytes("ranges", ranges)
      .finish();
}

Bytes Pcl::encode() const { return encode_list({tbs(), signature}); }

Pcl Pcl::decode(ByteView encoded) {
  const auto parts = decode_list(encoded);
  if (parts.size() != 2) throw Error("decode-error", "pcl must hold tbs and signature");
  RecordReader r(parts[0]);
  Pcl pcl;
  pcl.ca_id = r.str("ca_id");
  pcl.as_of = r.i64("as_of");
  pcl.state_version = r.u64("state_version");
  const Bytes& raw = r.bytes("ranges");
  if (raw.size() % 16 != 0) throw Error("decode-error", "pcl range block");
  std::vector<SerialRange> ranges;
  for (std::size_t i = 0; i < raw.size(); i += 16) {
    ranges.push_back(SerialRange{read_u64(ByteView(raw).subspan(i, 8)), read_u64(ByteView(raw).subspan(i + 8, 8))});
  }
  pcl.valid_serials = expand_ranges(ranges);
  pcl.signature = parts[1];
  if (pcl.tbs() != parts[0]) throw Error("decode-error", "pcl tbs is not canonical");
  return pcl;
}

bool Pcl::verify(const IssuerKey& ca_key) const {
  if (ca_key.issuer_id != ca_id) return false;
  try {
    return verify_message(ca_key.scheme_id, ca_key.public_key, tbs(), signature);
  } catch (const Error&) {
    return false;
  }
}

bool Pcl::contains(std::uint64_t serial) const {
  return std::binary_search(valid_serials.begin(), valid_serials.end(), serial);
}

Pcl generate_pcl(const RevocationState& state, const IssuedIndex& index, const KeyPair& ca_key, UnixTime at_time) {
  Pcl pcl;
  pcl.ca_id = state.ca_id();
  pcl.as_of = at_time;
  pcl.state_version = state.version();
  for (const auto& [serial, cert] : index) {
    if (classify(serial, state, index, at_time) == SerialState::valid) pcl.valid_serials.push_back(serial);
  }
  pcl.signature = sign_message(ca_key, pcl.tbs());
  return pcl;
}

const Pcl& PclCache::get(const RevocationState& state, const IssuedIndex& index, const KeyPair& ca_key,
                         UnixTime at_time) {
  if (!filled_ || cached_.state_version != state.version() || cached_.as_of != at_time ||
      issued_count_ != index.size() || cached_.ca_id != state.ca_id()) {
    cached_ = generate_pcl(state, index, ca_key, at_time);
    issued_count_ = index.size();
    filled_ = true;
  }
  return cached_;
}

}  // namespace eidpki::revocation
