#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "eidpki/core/bytes.hpp"
#include "eidpki/core/crypto.hpp"

namespace eidpki {

inline constexpr std::string_view kTestMacScheme = "test-mac";
inline constexpr std::string_view kEd25519Scheme = "ed25519";
inline constexpr std::string_view kX25519Scheme = "x25519-sealed";

// Key lengths carried as certificate metadata: CA keys 2048, user keys 4096.
inline constexpr std::uint32_t kCaKeyLengthBits = 2048;
inline constexpr std::uint32_t kUserKeyLengthBits = 4096;

// A key pair. The private half is deliberately absent from every public
// encoding; it only leaves memory inside sealed blocks.
struct KeyPair {
  Bytes public_key;
  Bytes private_key;
  std::string scheme_id;
  std::uint32_t key_length_bits = 0;
};

class SignatureScheme {
 public:
  virtual ~SignatureScheme() = default;

  virtual std::string_view id() const = 0;
  virtual bool deterministic() const = 0;
  virtual KeyPair generate(std::uint32_t key_length_bits, Random& rng) const = 0;
  virtual Bytes derive_public(ByteView private_key) const = 0;
  virtual Bytes sign(ByteView private_key, ByteView message) const = 0;
  virtual bool verify(ByteView public_key, ByteView message, ByteView signature) const = 0;
};

// Throws Error("scheme-not-registered").
const SignatureScheme& find_scheme(std::string_view scheme_id);
std::vector<std::string> registered_schemes();

KeyPair generate_key_pair(std::string_view scheme_id, std::uint32_t key_length_bits, Random& rng);
Bytes sign_message(const KeyPair& key, ByteView message);
bool verify_message(std::string_view scheme_id, ByteView public_key, ByteView message, ByteView signature);

// Encryption keys (X25519 sealed boxes) for encryption-profile certificates.
KeyPair generate_encryption_key_pair(std::uint32_t key_length_bits, Random& rng);
Bytes derive_encryption_public(ByteView private_key);
Bytes encrypt_to(ByteView public_key, ByteView plaintext);
// Throws Error("decrypt-failed").
Bytes decrypt_with(const KeyPair& key, ByteView ciphertext);

// Rebuilds the public half from the private half for either key family.
Bytes derive_public_key(std::string_view scheme_id, ByteView private_key);

}  // namespace eidpki
