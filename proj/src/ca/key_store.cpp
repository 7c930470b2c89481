#include "eidpki/ca/key_store.hpp"

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki::ca {

const KeyPair& KeyContainer::key(std::string_view label) const {
  auto it = keys.find(label);
  if (it == keys.end()) throw Error("key-not-found", container_id + "/" + std::string(label));
  return it->second;
}

KeyContainer& KeyStore::create(std::string_view host_id, std::string_view owner) {
  std::string id;
  do {
    id = "kc-" + std::to_string(++sequence_) + "-" + std::string(owner);
  } while (containers_.count(id) != 0);
  KeyContainer c;
  c.container_id = id;
  c.host_id = std::string(host_id);
  return containers_.emplace(id, std::move(c)).first->second;
}

const KeyContainer* KeyStore::find(std::string_view container_id) const {
  auto it = containers_.find(container_id);
  return it == containers_.end() ? nullptr : &it->second;
}

KeyContainer& KeyStore::at(std::string_view container_id) {
  auto it = containers_.find(container_id);
  if (it == containers_.end()) throw Error("key-not-found", "container " + std::string(container_id));
  return it->second;
}

const KeyContainer& KeyStore::at(std::string_view container_id) const {
  auto it = containers_.find(container_id);
  if (it == containers_.end()) throw Error("key-not-found", "container " + std::string(container_id));
  return it->second;
}

void KeyStore::restore(KeyContainer container) {
  const std::string id = container.container_id;
  if (!containers_.emplace(id, std::move(container)).second) throw Error("id-conflict", "container " + id);
  ++sequence_;
}

std::size_t KeyStore::key_pair_count() const {
  std::size_t n = 0;
  for (const auto& [id, c] : containers_) n += c.keys.size();
  return n;
}

namespace {

Bytes encode_key_pair_secret(const KeyPair& k) {
  return RecordWriter()
      .bytes("public_key", k.public_key)
      .bytes("private_key", k.private_key)
      .str("scheme_id", k.scheme_id)
      .u64("key_length_bits", k.key_length_bits)
      .finish();
}

KeyPair decode_key_pair_secret(ByteView encoded) {
  RecordReader r(encoded);
  return KeyPair{r.bytes("public_key"), r.bytes("private_key"), r.str("scheme_id"),
                 static_cast<std::uint32_t>(r.u64("key_length_bits"))};
}

}  // namespace

Bytes seal_container(const KeyContainer& container, ByteView seal_key, Random& rng) {
  RecordWriter key_record;
  for (const auto& [label, k] : container.keys) key_record.bytes(label, encode_key_pair_secret(k));
  RecordWriter secret_record;
  for (const auto& [label, s] : container.secrets) secret_record.bytes(label, s);
  const Bytes plain = RecordWriter()
                          .str("container_id", container.container_id)
                          .str("host_id", container.host_id)
                          .bytes("keys", key_record.finish())
                          .bytes("secrets", secret_record.finish())
                          .finish();
  return aead_seal(seal_key, plain, to_bytes("key-container"), rng);
}

KeyContainer open_container(ByteView sealed, ByteView seal_key) {
  const Bytes plain = aead_open(seal_key, sealed, to_bytes("key-container"));
  RecordReader r(plain);
  KeyContainer c;
  c.container_id = r.str("container_id");
  c.host_id = r.str("host_id");
  const RecordReader keys(r.bytes("keys"));
  for (const auto& [label, v] : keys.fields()) c.keys.emplace(label, decode_key_pair_secret(v));
  const RecordReader secrets(r.bytes("secrets"));
  for (const auto& [label, v] : secrets.fields()) c.secrets.emplace(label, v);
  return c;
}

Bytes seal_key_pair(const KeyPair& key, ByteView seal_key, std::string_view context, Random& rng) {
  return aead_seal(seal_key, encode_key_pair_secret(key), to_bytes(context), rng);
}

KeyPair open_key_pair(ByteView sealed, ByteView seal_key, std::string_view context) {
  return decode_key_pair_secret(aead_open(seal_key, sealed, to_bytes(context)));
}

}  // namespace eidpki::ca
