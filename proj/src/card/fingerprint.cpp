#include "eidpki/card/fingerprint.hpp"

#include <algorithm>
#include <tuple>

#include "eidpki/core/canonical.hpp"
#include "eidpki/core/error.hpp"

namespace eidpki::card {

void FingerprintTemplate::validate() const {
  if (minutiae.size() > kMaxMinutiae) throw Error("template-invalid", "more than 128 minutiae");
  if (quality < 0 || quality > 100) throw Error("template-invalid", "quality out of range");
  for (const Minutia& m : minutiae) {
    if (m.x < 0 || m.x >= kCoordinateLimit || m.y < 0 || m.y >= kCoordinateLimit) {
      throw Error("template-invalid", "minutia position out of range");
    }
    if (m.angle < 0 || m.angle >= kAngleLimit) throw Error("template-invalid", "minutia angle out of range");
  }
}

Bytes FingerprintTemplate::encode() const {
  validate();
  Bytes points;
  for (const Minutia& m : minutiae) {
    append_u16(points, static_cast<std::uint16_t>(m.x));
    append_u16(points, static_cast<std::uint16_t>(m.y));
    append_u16(points, static_cast<std::uint16_t>(m.angle));
  }
  return RecordWriter().bytes("minutiae", points).u64("quality", static_cast<std::uint64_t>(quality)).finish();
}

FingerprintTemplate FingerprintTemplate::decode(ByteView encoded) {
  RecordReader r(encoded);
  const Bytes& points = r.bytes("minutiae");
  if (points.size() % 6 != 0) throw Error("decode-error", "minutiae block not a multiple of 6");
  FingerprintTemplate t;
  for (std::size_t off = 0; off < points.size(); off += 6) {
    ByteView p(points.data() + off, 6);
    t.minutiae.push_back(Minutia{read_u16(p.subspan(0)), read_u16(p.subspan(2)), read_u16(p.subspan(4))});
  }
  const std::uint64_t quality = r.u64("quality");
  if (quality > 100) throw Error("template-invalid", "quality out of range");
  t.quality = static_cast<int>(quality);
  t.validate();
  return t;
}

int angle_distance(int a, int b) {
  int d = std::abs(a - b) % kAngleLimit;
  return std::min(d, kAngleLimit - d);
}

bool within_tolerance(const Minutia& a, const Minutia& b) {
  return std::abs(a.x - b.x) <= kPositionTolerance && std::abs(a.y - b.y) <= kPositionTolerance &&
         angle_distance(a.angle, b.angle) <= kAngleTolerance;
}

std::size_t count_matched_minutiae(const FingerprintTemplate& enrolled, const FingerprintTemplate& probe) {
  struct Candidate {
    int dist2;
    int dangle;
    std::size_t i;
    std::size_t j;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < enrolled.minutiae.size(); ++i) {
    for (std::size_t j = 0; j < probe.minutiae.size(); ++j) {
      const Minutia& a = enrolled.minutiae[i];
      const Minutia& b = probe.minutiae[j];
      if (!within_tolerance(a, b)) continue;
      const int dx = a.x - b.x;
      const int dy = a.y - b.y;
      candidates.push_back({dx * dx + dy * dy, angle_distance(a.angle, b.angle), i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& l, const Candidate& r) {
    return std::tie(l.dist2, l.dangle, l.i, l.j) < std::tie(r.dist2, r.dangle, r.i, r.j);
  });

  std::vector<bool> used_enrolled(enrolled.minutiae.size());
  std::vector<bool> used_probe(probe.minutiae.size());
  std::size_t matched = 0;
  for (const Candidate& c : candidates) {
    if (used_enrolled[c.i] || used_probe[c.j]) continue;
    used_enrolled[c.i] = true;
    used_probe[c.j] = true;
    ++matched;
  }
  return matched;
}

MatchResult match_templates(const FingerprintTemplate& enrolled, const FingerprintTemplate& probe, double threshold) {
  MatchResult result;
  const std::size_t denom = std::max(enrolled.minutiae.size(), probe.minutiae.size());
  if (enrolled.minutiae.empty() || probe.minutiae.empty()) return result;
  result.matched = count_matched_minutiae(enrolled, probe);
  result.score = static_cast<double>(result.matched) / static_cast<double>(denom);
  result.decision = result.score >= threshold;
  return result;
}

FingerprintTemplate synthesize_template(Random& rng, std::size_t count) {
  if (count > kMaxMinutiae) throw Error("template-invalid", "more than 128 minutiae");
  FingerprintTemplate t;
  t.quality = 60 + static_cast<int>(rng.uniform(41));
  for (std::size_t k = 0; k < count; ++k) {
    t.minutiae.push_back(Minutia{static_cast<int>(rng.uniform(kCoordinateLimit)),
                                 static_cast<int>(rng.uniform(kCoordinateLimit)),
                                 static_cast<int>(rng.uniform(kAngleLimit))});
  }
  return t;
}

namespace {

int jittered(int value, int jitter, Random& rng) {
  if (jitter <= 0) return value;
  return value + static_cast<int>(rng.uniform(static_cast<std::uint64_t>(2 * jitter + 1))) - jitter;
}

}  // namespace

FingerprintTemplate recapture(const FingerprintTemplate& enrolled, Random& rng, int jitter, std::size_t drop) {
  FingerprintTemplate t;
  t.quality = enrolled.quality;
  std::vector<Minutia> kept = enrolled.minutiae;
  for (std::size_t k = 0; k < drop && !kept.empty(); ++k) kept.erase(kept.begin() + rng.uniform(kept.size()));
  for (const Minutia& m : kept) {
    Minutia n;
    n.x = std::clamp(jittered(m.x, jitter, rng), 0, kCoordinateLimit - 1);
    n.y = std::clamp(jittered(m.y, jitter, rng), 0, kCoordinateLimit - 1);
    n.angle = ((jittered(m.angle, 2 * jitter, rng) % kAngleLimit) + kAngleLimit) % kAngleLimit;
    t.minutiae.push_back(n);
  }
  return t;
}

}  // namespace eidpki::card
