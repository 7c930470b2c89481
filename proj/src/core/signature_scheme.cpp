#include "eidpki/core/signature_scheme.hpp"

#include <sodium.h>

#include "eidpki/core/error.hpp"

namespace eidpki {

namespace {

// INSECURE: public key equals private key. Exists so tests and oracles can
// recompute signatures independently.
class TestMacScheme final : public SignatureScheme {
 public:
  std::string_view id() const override { return kTestMacScheme; }
  bool deterministic() const override { return true; }

  KeyPair generate(std::uint32_t key_length_bits, Random& rng) const override {
    Bytes key = rng.bytes(32);
    return KeyPair{key, key, std::string(id()), key_length_bits};
  }

  Bytes derive_public(ByteView private_key) const override { return Bytes(private_key.begin(), private_key.end()); }

  Bytes sign(ByteView private_key, ByteView message) const override {
    return sha256(concat({private_key, message}));
  }

  bool verify(ByteView public_key, ByteView message, ByteView signature) const override {
    if (public_key.empty()) return false;
    return constant_time_equal(sha256(concat({public_key, message})), signature);
  }
};

class Ed25519Scheme final : public SignatureScheme {
 public:
  std::string_view id() const override { return kEd25519Scheme; }
  bool deterministic() const override { return true; }

  KeyPair generate(std::uint32_t key_length_bits, Random& rng) const override {
    Bytes seed = rng.bytes(crypto_sign_ed25519_SEEDBYTES);
    Bytes pk(crypto_sign_ed25519_PUBLICKEYBYTES);
    Bytes sk(crypto_sign_ed25519_SECRETKEYBYTES);
    crypto_sign_ed25519_seed_keypair(pk.data(), sk.data(), seed.data());
    sodium_memzero(seed.data(), seed.size());
    return KeyPair{std::move(pk), std::move(sk), std::string(id()), key_length_bits};
  }

  Bytes derive_public(ByteView private_key) const override {
    if (private_key.size() != crypto_sign_ed25519_SECRETKEYBYTES) throw Error("invalid-key", "ed25519 secret size");
    Bytes pk(crypto_sign_ed25519_PUBLICKEYBYTES);
    crypto_sign_ed25519_sk_to_pk(pk.data(), private_key.data());
    return pk;
  }

  Bytes sign(ByteView private_key, ByteView message) const override {
    if (private_key.size() != crypto_sign_ed25519_SECRETKEYBYTES) throw Error("invalid-key", "ed25519 secret size");
    Bytes sig(crypto_sign_ed25519_BYTES);
    crypto_sign_ed25519_detached(sig.data(), nullptr, message.data(), message.size(), private_key.data());
    return sig;
  }

  bool verify(ByteView public_key, ByteView message, ByteView signature) const override {
    if (public_key.size() != crypto_sign_ed25519_PUBLICKEYBYTES) return false;
    if (signature.size() != crypto_sign_ed25519_BYTES) return false;
    return crypto_sign_ed25519_verify_detached(signature.data(), message.data(), message.size(), public_key.data()) ==
           0;
  }
};

const TestMacScheme kTestMac;
const Ed25519Scheme kEd25519;

}  // namespace

const SignatureScheme& find_scheme(std::string_view scheme_id) {
  if (scheme_id == kTestMacScheme) return kTestMac;
  if (scheme_id == kEd25519Scheme) return kEd25519;
  throw Error("scheme-not-registered", std::string(scheme_id));
}

std::vector<std::string> registered_schemes() {
  return {std::string(kEd25519Scheme), std::string(kTestMacScheme)};
}

KeyPair generate_key_pair(std::string_view scheme_id, std::uint32_t key_length_bits, Random& rng) {
  const SignatureScheme& scheme = find_scheme(scheme_id);
  if (key_length_bits == 0) throw Error("invalid-argument", "key_length_bits must be positive");
  return scheme.generate(key_length_bits, rng);
}

Bytes sign_message(const KeyPair& key, ByteView message) {
  return find_scheme(key.scheme_id).sign(key.private_key, message);
}

bool verify_message(std::string_view scheme_id, ByteView public_key, ByteView message, ByteView signature) {
  return find_scheme(scheme_id).verify(public_key, message, signature);
}

KeyPair generate_encryption_key_pair(std::uint32_t key_length_bits, Random& rng) {
  if (key_length_bits == 0) throw Error("invalid-argument", "key_length_bits must be positive");
  Bytes sk = rng.bytes(crypto_box_SECRETKEYBYTES);
  return KeyPair{derive_encryption_public(sk), std::move(sk), std::string(kX25519Scheme), key_length_bits};
}

Bytes derive_encryption_public(ByteView private_key) {
  if (private_key.size() != crypto_box_SECRETKEYBYTES) throw Error("invalid-key", "x25519 secret size");
  Bytes pk(crypto_box_PUBLICKEYBYTES);
  crypto_scalarmult_base(pk.data(), private_key.data());
  return pk;
}

Bytes encrypt_to(ByteView public_key, ByteView plaintext) {
  if (public_key.size() != crypto_box_PUBLICKEYBYTES) throw Error("invalid-key", "x25519 public size");
  Bytes out(plaintext.size() + crypto_box_SEALBYTES);
  crypto_box_seal(out.data(), plaintext.data(), plaintext.size(), public_key.data());
  return out;
}

Bytes decrypt_with(const KeyPair& key, ByteView ciphertext) {
  if (key.scheme_id != kX25519Scheme) throw Error("decrypt-failed", "not an encryption key");
  if (ciphertext.size() < crypto_box_SEALBYTES) throw Error("decrypt-failed", "ciphertext too short");
  Bytes out(ciphertext.size() - crypto_box_SEALBYTES);
  if (crypto_box_seal_open(out.data(), ciphertext.data(), ciphertext.size(), key.public_key.data(),
                           key.private_key.data()) != 0) {
    throw Error("decrypt-failed");
  }
  return out;
}

Bytes derive_public_key(std::string_view scheme_id, ByteView private_key) {
  if (scheme_id == kX25519Scheme) return derive_encryption_public(private_key);
  return find_scheme(scheme_id).derive_public(private_key);
}

}  // namespace eidpki
