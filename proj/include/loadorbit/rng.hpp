#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>

namespace loadorbit {

// SplitMix64 (Steele, Lea, Flood 2014). Chosen over <random> engines because
// the uniform_real_distribution mapping is implementation-defined; this
// generator plus the 53-bit mantissa mapping below gives the same stream on
// every platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1): top 53 bits scaled by 2^-53.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller (one value per call; the pair's second
  // member is discarded to keep the stream position obvious).
  double normal() {
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Uniformly distributed direction on the unit sphere in R^dim.
  Eigen::VectorXd unit_vector(int dim) {
    Eigen::VectorXd v(dim);
    double norm = 0.0;
    do {
      for (int i = 0; i < dim; ++i) v[i] = normal();
      norm = v.norm();
    } while (norm < 1e-12);
    return v / norm;
  }

 private:
  std::uint64_t state_;
};

}  // namespace loadorbit
