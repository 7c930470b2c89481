#pragma once

#include <map>
#include <string>
#include <string_view>

#include "eidpki/core/signature_scheme.hpp"

namespace eidpki::ca {

inline constexpr std::string_view kSigningKeyLabel = "signing";
inline constexpr std::string_view kWrapKeyLabel = "wrap";

// One isolated partition on an emulated security module.
struct KeyContainer {
  std::string container_id;
  std::string host_id;
  std::map<std::string, KeyPair, std::less<>> keys;
  std::map<std::string, Bytes, std::less<>> secrets;  // symmetric keys, never exported

  const KeyPair& key(std::string_view label) const;
};

class KeyStore {
 public:
  // Creates an empty container with a fresh id on host_id.
  KeyContainer& create(std::string_view host_id, std::string_view owner);
  const KeyContainer* find(std::string_view container_id) const;
  KeyContainer& at(std::string_view container_id);
  const KeyContainer& at(std::string_view container_id) const;

  // Throws Error("id-conflict") if the container id exists.
  void restore(KeyContainer container);

  std::size_t key_pair_count() const;
  const std::map<std::string, KeyContainer, std::less<>>& containers() const { return containers_; }

 private:
  std::map<std::string, KeyContainer, std::less<>> containers_;
  std::uint64_t sequence_ = 0;
};

// Persistence of a container is only ever in sealed form.
Bytes seal_container(const KeyContainer& container, ByteView seal_key, Random& rng);
KeyContainer open_container(ByteView sealed, ByteView seal_key);

// Sealed form of a single key pair, for secrets held outside a container.
Bytes seal_key_pair(const KeyPair& key, ByteView seal_key, std::string_view context, Random& rng);
KeyPair open_key_pair(ByteView sealed, ByteView seal_key, std::string_view context);

}  // namespace eidpki::ca
