#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eidpki/core/bytes.hpp"

namespace eidpki {

// Canonical record encoding shared by every signed or persisted structure.
//
//   record := field*                   fields sorted by name, bytewise ascending
//   field  := u32be(len(name)) name u32be(len(value)) value
//
// Integers are 8-byte big-endian, booleans a single 0/1 byte, enums their
// lowercase name. Nested records and lists are carried as opaque values.
class RecordWriter {
 public:
  RecordWriter& bytes(std::string_view name, ByteView value);
  RecordWriter& str(std::string_view name, std::string_view value);
  RecordWriter& u64(std::string_view name, std::uint64_t value);
  RecordWriter& i64(std::string_view name, std::int64_t value);
  RecordWriter& boolean(std::string_view name, bool value);

  Bytes finish() const;

 private:
  std::map<std::string, Bytes, std::less<>> fields_;
};

// Strict reader: rejects truncated input, duplicate or unsorted names.
// Accessors for missing fields throw Error("decode-error").
class RecordReader {
 public:
  explicit RecordReader(ByteView encoded);

  bool has(std::string_view name) const;
  const Bytes& bytes(std::string_view name) const;
  std::string str(std::string_view name) const;
  std::uint64_t u64(std::string_view name) const;
  std::int64_t i64(std::string_view name) const;
  bool boolean(std::string_view name) const;

  std::optional<std::string> opt_str(std::string_view name) const;
  const std::map<std::string, Bytes, std::less<>>& fields() const { return fields_; }

 private:
  std::map<std::string, Bytes, std::less<>> fields_;
};

// List value: concatenation of u32be(len(item)) item.
Bytes encode_list(const std::vector<Bytes>& items);
std::vector<Bytes> decode_list(ByteView encoded);

// u32be(len) || bytes
Bytes length_prefixed(ByteView value);

// Encodes a string map as a nested record keyed by the map keys.
Bytes encode_string_map(const std::map<std::string, std::string>& values);
std::map<std::string, std::string> decode_string_map(ByteView encoded);

}  // namespace eidpki
