#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "lsq/errors.hpp"

namespace lsq {

// splitmix64 finalizer; bijective 64-bit mixer.
inline std::uint64_t mix_u64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derives the seed for a numbered child stream. Replicate r of a simulation
// always draws from split_seed(master_seed, r) regardless of scheduling, so
// results do not depend on thread count.
inline std::uint64_t split_seed(std::uint64_t master_seed, std::uint64_t stream) {
  return mix_u64(mix_u64(master_seed) ^ mix_u64(stream * 0x9E3779B97F4A7C15ull + 1));
}

// Deterministic draw stream. All samplers are implemented here rather than
// with std::*_distribution, whose output is implementation-defined; given the
// same seed this class produces bit-identical streams on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on (0, 1]; never returns 0, safe under log().
  double uniform() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // Uniform on [0, 1).
  double uniform_half_open() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller, consuming two uniforms per pair.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double a = 2.0 * kPi * uniform_half_open();
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // +1 or -1 with equal probability.
  double rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  // Uniform on [-sqrt(3), sqrt(3)); unit variance.
  double uniform_sym_unit_var() { return (2.0 * uniform_half_open() - 1.0) * kSqrt3; }

  // Gamma(shape, 1) via Marsaglia-Tsang squeeze; shape > 0.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw UsageError("gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double z = normal();
      double v = 1.0 + c * z;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) return d * v;
    }
  }

  double chi_square(double df) { return 2.0 * gamma(0.5 * df); }

  // Student t with df degrees of freedom.
  double student_t(double df) {
    if (!(df > 0.0)) throw UsageError("student_t: df must be positive");
    return normal() / std::sqrt(chi_square(df) / df);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  static constexpr double kSqrt3 = 1.7320508075688772;

  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lsq
