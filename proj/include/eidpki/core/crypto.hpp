#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>

#include "eidpki/core/bytes.hpp"

namespace eidpki {

inline constexpr std::size_t kHashSize = 32;

Bytes sha256(ByteView data);
Bytes hmac_sha256(ByteView key, ByteView data);
bool constant_time_equal(ByteView a, ByteView b);

// Randomness source. A seeded instance is a deterministic stream (ChaCha20
// keyed from the seed and ratcheted per call), which is what lets golden
// transcripts replay byte-for-byte. The default instance reads the OS CSPRNG.
// Thread-safe.
class Random {
 public:
  Random();
  explicit Random(std::uint64_t seed);
  explicit Random(ByteView seed_material);

  Random(const Random&) = delete;
  Random& operator=(const Random&) = delete;

  Bytes bytes(std::size_t count);
  std::uint64_t next_u64();
  // Uniform in [0, bound). bound must be > 0.
  std::uint64_t uniform(std::uint64_t bound);
  bool deterministic() const { return deterministic_; }

 private:
  std::mutex mutex_;
  bool deterministic_ = false;
  Bytes key_;
};

using Clock = std::function<UnixTime()>;

Clock system_clock();

// Settable clock for tests and replayable CLI runs.
class ManualClock {
 public:
  explicit ManualClock(UnixTime start) : now_(std::make_shared<UnixTime>(start)) {}
  UnixTime now() const { return *now_; }
  void set(UnixTime t) { *now_ = t; }
  void advance(UnixTime seconds) { *now_ += seconds; }
  Clock clock() const {
    auto now = now_;
    return [now] { return *now; };
  }

 private:
  std::shared_ptr<UnixTime> now_;
};

// Authenticated symmetric encryption (XChaCha20-Poly1305). Output is
// nonce || ciphertext. open() throws Error("unseal-failed") on any mismatch.
inline constexpr std::size_t kSymmetricKeySize = 32;
Bytes aead_seal(ByteView key, ByteView plaintext, ByteView associated_data, Random& rng);
Bytes aead_open(ByteView key, ByteView sealed, ByteView associated_data);

}  // namespace eidpki
