#include "eidpki/core/crypto.hpp"

#include <sodium.h>

#include <chrono>

#include "eidpki/core/error.hpp"

namespace eidpki {

namespace {

void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw Error("crypto-init", "libsodium failed to initialize");
    return true;
  }();
  (void)ready;
}

}  // namespace

Bytes sha256(ByteView data) {
  ensure_sodium();
  Bytes out(crypto_hash_sha256_BYTES);
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

Bytes hmac_sha256(ByteView key, ByteView data) {
  ensure_sodium();
  crypto_auth_hmacsha256_state state;
  crypto_auth_hmacsha256_init(&state, key.data(), key.size());
  crypto_auth_hmacsha256_update(&state, data.data(), data.size());
  Bytes out(crypto_auth_hmacsha256_BYTES);
  crypto_auth_hmacsha256_final(&state, out.data());
  return out;
}

bool constant_time_equal(ByteView a, ByteView b) {
  ensure_sodium();
  if (a.size() != b.size()) return false;
  if (a.empty()) return true;
  return sodium_memcmp(a.data(), b.data(), a.size()) == 0;
}

Random::Random() { ensure_sodium(); }

Random::Random(std::uint64_t seed) {
  ensure_sodium();
  Bytes material = to_bytes("eidpki-random-seed");
  append_u64(material, seed);
  key_ = sha256(material);
  deterministic_ = true;
}

Random::Random(ByteView seed_material) {
  ensure_sodium();
  key_ = sha256(concat({to_bytes("eidpki-random-material"), seed_material}));
  deterministic_ = true;
}

Bytes Random::bytes(std::size_t count) {
  Bytes out(count);
  std::lock_guard lock(mutex_);
  if (!deterministic_) {
    randombytes_buf(out.data(), out.size());
    return out;
  }
  static_assert(randombytes_SEEDBYTES == 32);
  randombytes_buf_deterministic(out.data(), out.size(), key_.data());
  key_ = sha256(concat({key_, to_bytes("ratchet")}));
  return out;
}

std::uint64_t Random::next_u64() { return read_u64(bytes(8)); }

std::uint64_t Random::uniform(std::uint64_t bound) {
  if (bound == 0) throw Error("invalid-argument", "uniform bound must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  for (;;) {
    std::uint64_t v = next_u64();
    if (v < limit) return v % bound;
  }
}

Clock system_clock() {
  return [] {
    return static_cast<UnixTime>(
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
            .count());
  };
}

Bytes aead_seal(ByteView key, ByteView plaintext, ByteView associated_data, Random& rng) {
  ensure_sodium();
  if (key.size() != crypto_aead_xchacha20poly1305_ietf_KEYBYTES) throw Error("invalid-key", "wrap key size");
  Bytes out = rng.bytes(crypto_aead_xchacha20poly1305_ietf_NPUBBYTES);
  const std::size_t header = out.size();
  out.resize(header + plaintext.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES);
  unsigned long long written = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt(out.data() + header, &written, plaintext.data(), plaintext.size(),
                                             associated_data.data(), associated_data.size(), nullptr, out.data(),
                                             key.data());
  out.resize(header + written);
  return out;
}

Bytes aead_open(ByteView key, ByteView sealed, ByteView associated_data) {
  ensure_sodium();
  constexpr std::size_t kNonce = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
  constexpr std::size_t kTag = crypto_aead_xchacha20poly1305_ietf_ABYTES;
  if (key.size() != crypto_aead_xchacha20poly1305_ietf_KEYBYTES) throw Error("invalid-key", "wrap key size");
  if (sealed.size() < kNonce + kTag) throw Error("unseal-failed", "sealed block too short");
  Bytes out(sealed.size() - kNonce - kTag);
  unsigned long long written = 0;
  if (crypto_aead_xchacha20poly1305_ietf_decrypt(out.data(), &written, nullptr, sealed.data() + kNonce,
                                                 sealed.size() - kNonce, associated_data.data(),
                                                 associated_data.size(), sealed.data(), key.data()) != 0) {
    throw Error("unseal-failed");
  }
  out.resize(written);
  return out;
}

}  // namespace eidpki
