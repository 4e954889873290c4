#ifndef CELLFREE_RNG_HPP
#define CELLFREE_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace cellfree {

using Rng = std::mt19937_64;

/// Independent purposes within one trial. Each gets its own stream so e.g.
/// changing the packet length never perturbs the channel draw.
enum class StreamTag : std::uint32_t { Geometry = 1, Shadowing = 2, SmallScale = 3, Bits = 4, Noise = 5 };

/// Deterministic sub-stream keyed by (seed, trial, attempt, tag). Trials can
/// run in any order or in parallel and see the same numbers.
inline Rng make_stream(std::uint64_t seed, std::uint64_t trial, std::uint32_t attempt, StreamTag tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial & 0xffffffffu), static_cast<std::uint32_t>(trial >> 32),
                    attempt, static_cast<std::uint32_t>(tag)};
  return Rng(seq);
}

/// Circularly symmetric complex Gaussian with the given variance.
inline std::complex<double> draw_cn(Rng& rng, double variance) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = std::sqrt(variance / 2.0);
  const double re = normal(rng);
  const double im = normal(rng);
  return {s * re, s * im};
}

}  // namespace cellfree

#endif  // CELLFREE_RNG_HPP
