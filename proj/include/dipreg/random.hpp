#pragma once

#include "dipreg/tensor.hpp"

#include <cstdint>
#include <random>

namespace dipreg {

/// Seedable deterministic generator used for all sampling in the engine.
///
/// The stream is pinned so results are reproducible for a given seed:
/// a std::mt19937_64 core (bit-exact by the standard), uniforms taken as
/// the top 53 bits scaled to [0,1), and normals via the Box-Muller
/// transform with the second deviate cached. std::normal_distribution is
/// deliberately avoided: its algorithm is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    gen_.seed(seed);
    has_spare_ = false;
    spare_ = 0.0;
  }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// N(mean, stddev^2) deviate; stddev = 0 returns mean exactly.
  double normal(double mean, double stddev);

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Leaf tensor of i.i.d. N(mean, stddev^2) samples in row-major order.
Tensor sample_normal(Rng& rng, Shape shape, double mean, double stddev,
                     bool requires_grad = false);

}  // namespace dipreg
