#include "eidpki/core/canonical.hpp"

#include "eidpki/core/error.hpp"

namespace eidpki {

RecordWriter& RecordWriter::bytes(std::string_view name, ByteView value) {
  fields_.insert_or_assign(std::string(name), Bytes(value.begin(), value.end()));
  return *this;
}

RecordWriter& RecordWriter::str(std::string_view name, std::string_view value) {
  return bytes(name, to_bytes(value));
}

RecordWriter& RecordWriter::u64(std::string_view name, std::uint64_t value) {
  Bytes v;
  append_u64(v, value);
  return bytes(name, v);
}

RecordWriter& RecordWriter::i64(std::string_view name, std::int64_t value) {
  return u64(name, static_cast<std::uint64_t>(value));
}

RecordWriter& RecordWriter::boolean(std::string_view name, bool value) {
  const std::uint8_t b = value ? 1 : 0;
  return bytes(name, ByteView(&b, 1));
}

Bytes RecordWriter::finish() const {
  Bytes out;
  for (const auto& [name, value] : fields_) {
    append(out, length_prefixed(to_bytes(name)));
    append(out, length_prefixed(value));
  }
  return out;
}

namespace {

Bytes take_prefixed(ByteView in, std::size_t& pos) {
  if (in.size() - pos < 4) throw Error("decode-error", "truncated length");
  const std::uint32_t len = read_u32(in.subspan(pos, 4));
  pos += 4;
  if (in.size() - pos < len) throw Error("decode-error", "truncated value");
  Bytes out(in.begin() + static_cast<std::ptrdiff_t>(pos), in.begin() + static_cast<std::ptrdiff_t>(pos + len));
  pos += len;
  return out;
}

}  // namespace

RecordReader::RecordReader(ByteView encoded) {
  std::size_t pos = 0;
  std::string previous;
  bool first = true;
  while (pos < encoded.size()) {
    std::string name = to_string(take_prefixed(encoded, pos));
    Bytes value = take_prefixed(encoded, pos);
    if (!first && name <= previous) throw Error("decode-error", "fields out of canonical order");
    first = false;
    previous = name;
    fields_.emplace(std::move(name), std::move(value));
  }
}

bool RecordReader::has(std::string_view name) const { return fields_.find(name) != fields_.end(); }

const Bytes& RecordReader::bytes(std::string_view name) const {
  auto it = fields_.find(name);
  if (it == fields_.end()) throw Error("decode-error", "missing field " + std::string(name));
  return it->second;
}

std::string RecordReader::str(std::string_view name) const { return to_string(bytes(name)); }

std::uint64_t RecordReader::u64(std::string_view name) const {
  const Bytes& v = bytes(name);
  if (v.size() != 8) throw Error("decode-error", "integer field " + std::string(name) + " is not 8 bytes");
  return read_u64(v);
}

std::int64_t RecordReader::i64(std::string_view name) const { return static_cast<std::int64_t>(u64(name)); }

bool RecordReader::boolean(std::string_view name) const {
  const Bytes& v = bytes(name);
  if (v.size() != 1 || v[0] > 1) throw Error("decode-error", "boolean field " + std::string(name));
  return v[0] == 1;
}

std::optional<std::string> RecordReader::opt_str(std::string_view name) const {
  if (!has(name)) return std::nullopt;
  return str(name);
}

Bytes encode_list(const std::vector<Bytes>& items) {
  Bytes out;
  for (const Bytes& item : items) append(out, length_prefixed(item));
  return out;
}

std::vector<Bytes> decode_list(ByteView encoded) {
  std::vector<Bytes> items;
  std::size_t pos = 0;
  while (pos < encoded.size()) items.push_back(take_prefixed(encoded, pos));
  return items;
}

Bytes length_prefixed(ByteView value) {
  Bytes out;
  out.reserve(4 + value.size());
  append_u32(out, static_cast<std::uint32_t>(value.size()));
  append(out, value);
  return out;
}

Bytes encode_string_map(const std::map<std::string, std::string>& values) {
  RecordWriter w;
  for (const auto& [k, v] : values) w.str(k, v);
  return w.finish();
}

std::map<std::string, std::string> decode_string_map(ByteView encoded) {
  std::map<std::string, std::string> out;
  const RecordReader reader(encoded);
  for (const auto& [k, v] : reader.fields()) out.emplace(k, to_string(v));
  return out;
}

}  // namespace eidpki
