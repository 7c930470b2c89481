#pragma once

#include <cstddef>
#include <vector>

#include "eidpki/core/bytes.hpp"
#include "eidpki/core/crypto.hpp"

namespace eidpki::card {

inline constexpr int kCoordinateLimit = 500;  // x, y in [0, 500)
inline constexpr int kAngleLimit = 360;
inline constexpr std::size_t kMaxMinutiae = 128;

inline constexpr int kPositionTolerance = 8;
inline constexpr int kAngleTolerance = 20;
inline constexpr double kDefaultMatchThreshold = 0.6;

struct Minutia {
  int x = 0;
  int y = 0;
  int angle = 0;

  friend bool operator==(const Minutia&, const Minutia&) = default;
};

struct FingerprintTemplate {
  std::vector<Minutia> minutiae;
  int quality = 0;

  // Throws Error("template-invalid").
  void validate() const;
  Bytes encode() const;
  static FingerprintTemplate decode(ByteView encoded);

  friend bool operator==(const FingerprintTemplate&, const FingerprintTemplate&) = default;
};

struct MatchResult {
  bool decision = false;
  double score = 0.0;
  std::size_t matched = 0;
};

// Smallest absolute difference between two angles on the 360-degree circle.
int angle_distance(int a, int b);
bool within_tolerance(const Minutia& a, const Minutia& b);

// Greedy nearest-first pairing: candidate pairs within tolerance are taken in
// order of squared position distance, then angle distance, then index.
std::size_t count_matched_minutiae(const FingerprintTemplate& enrolled, const FingerprintTemplate& probe);

// score = matched / max(|enrolled|, |probe|); 0 when either side is empty.
MatchResult match_templates(const FingerprintTemplate& enrolled, const FingerprintTemplate& probe,
                            double threshold = kDefaultMatchThreshold);

// Capture simulation used by enrollment fixtures and tests.
FingerprintTemplate synthesize_template(Random& rng, std::size_t count);
// A fresh capture of the same finger: each minutia jitters by up to `jitter`
// position units and twice that in degrees; `drop` minutiae go missing.
FingerprintTemplate recapture(const FingerprintTemplate& enrolled, Random& rng, int jitter = 3, std::size_t drop = 0);

}  // namespace eidpki::card
