#ifndef PEIV_RNG_HPP
#define PEIV_RNG_HPP

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace peiv {

// Counter-based pseudo random generator (splitmix64 core).
//
// The state is a plain 64-bit counter advanced by a fixed odd increment and
// pushed through a bijective mix on every draw, so a stream is fully
// determined by (seed, stream). Monte Carlo replications get their own
// stream id and therefore reproduce identically no matter which thread runs
// them or in what order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    state_ = mix(seed + kGamma * (stream + 1));
    state_ = mix(state_ ^ 0xD1B54A32D192ED03ULL);
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // Uniform in [0, 1), 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double next_gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    // u1 in (0, 1] keeps the log finite.
    const double u1 =
        (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd gaussian_vector(Eigen::Index n) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = next_gaussian();
    return z;
  }

  // One-off 64-bit child value, used to derive per-replication seeds.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(seed, stream).next_u64();
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace peiv

#endif  // PEIV_RNG_HPP
