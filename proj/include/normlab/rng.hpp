#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

namespace normlab {

// Deterministic pseudo-random stream: splitmix64 applied to an incrementing
// counter. One 64-bit seed fully determines the sequence on every platform,
// which is what makes reruns byte-identical. Do not swap this for a std::
// engine; std::normal_distribution is not pinned across implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 bits of mantissa.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Lemire-style multiply-shift; slight bias of
  // order n / 2^64 is irrelevant at our scales.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller. The second draw of each pair is cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double kTwoPi = 6.2831853071795864769;
    spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Sub-experiments (grid cells, repeated trials) derive their seeds from the
// top-level one by plain offset so a run can be reproduced cell by cell.
inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
  return seed + index;
}

inline Eigen::VectorXd normal_vector(Rng& rng, Eigen::Index dim) {
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.next_normal();
  return v;
}

// Column-major fill order; part of the frozen draw schema.
inline Eigen::MatrixXd normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.next_normal();
  return m;
}

}  // namespace normlab
