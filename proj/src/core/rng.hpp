#pragma once

#include <cmath>
#include <cstdint>

#include "errors.hpp"

namespace blink {

// Counter-style splittable PRNG. Streams are derived by mixing a master seed
// with up to three stream keys, so per-node (and per-channel) randomness is
// order-independent and safe to draw from concurrently across nodes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed + kGamma)) {}

  static Rng derive(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2 = 0,
                    std::uint64_t k3 = 0) {
    std::uint64_t s = mix(seed + kGamma);
    s = mix(s ^ mix(k1 + kGamma));
    s = mix(s ^ mix(k2 + 2 * kGamma));
    s = mix(s ^ mix(k3 + 3 * kGamma));
    return Rng(FromState{}, s);
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // Uniform on [0,1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1); never returns an exact endpoint, so inverse-CDF
  // transforms stay finite.
  double next_open_double() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return next_double() < p; }

 private:
  struct FromState {};
  Rng(FromState, std::uint64_t s) : state_(s) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::uint64_t state_;
};

// Inverse-CDF transform of a uniform draw to Laplace(0, scale).
// u == 0.5 maps exactly to 0.
inline double laplace_from_uniform(double u, double scale) {
  if (scale <= 0.0) throw ConfigError("laplace scale must be positive");
  double v = u - 0.5;
  if (v == 0.0) return 0.0;
  double l = -scale * std::log1p(-2.0 * std::fabs(v));
  return v < 0.0 ? -l : l;
}

inline double sample_laplace(double scale, Rng& rng) {
  return laplace_from_uniform(rng.next_open_double(), scale);
}

}  // namespace blink
