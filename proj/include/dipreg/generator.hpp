#pragma once

#include "dipreg/random.hpp"
#include "dipreg/tensor.hpp"

#include <vector>

namespace dipreg {

/// Encoder-decoder architecture of the displacement generator. The paper
/// behind this design leaves the sizes open; these defaults are a desk
/// scale choice and every field is exposed through the run configuration.
struct GeneratorConfig {
  int levels = 5;
  std::vector<int> channels_down = {16, 32, 64, 64, 64};
  std::vector<int> channels_up = {16, 32, 64, 64, 64};
  std::vector<int> channels_skip = {4, 4, 4, 4, 4};
  int kernel_size = 3;
  double activation_slope = 0.1;
  int input_channels = 16;  // noise channels C'
  static constexpr int output_channels = 2;

  /// Spatial extents must be divisible by this (2^levels).
  Index divisibility() const { return Index{1} << levels; }
  void validate() const;
};

/// Standard deviation of the parameter initialization; keeps the first
/// forward pass close to an identity warp.
inline constexpr double kParamInitStd = 0.01;

/// Standard deviation of the generator's noise input z, resampled on
/// every optimization iteration.
inline constexpr double kNoiseStd = 0.1;

/// Randomly-initialized convolutional generator mapping a {C',H,W} noise
/// tensor to a {2,H,W} displacement field.
///
/// Layout per level i: the encoder applies a stride-2 kxk convolution,
/// instance norm and leaky ReLU; a linear 1x1 convolution taps the level
/// input as the skip branch. The decoder upsamples 2x, concatenates the
/// matching skip branch, and applies a stride-1 kxk convolution, instance
/// norm and leaky ReLU. A final linear 1x1 convolution produces the two
/// displacement channels; there is no output activation.
class GeneratorNet {
 public:
  /// Samples every weight and bias i.i.d. N(0, kParamInitStd^2).
  static GeneratorNet init_params(const GeneratorConfig& config, Rng& rng);

  const GeneratorConfig& config() const { return config_; }

  /// All parameters in a stable order; shared handles, so optimizer
  /// updates through this list are seen by forward().
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }

  Tensor forward(const Tensor& z) const;

 private:
  struct Conv {
    Tensor weight, bias;
  };

  GeneratorConfig config_;
  std::vector<Conv> encoder_, skip_, decoder_;
  Conv output_;
  std::vector<Tensor> params_;
};

/// Fresh noise input z ~ N(0, kNoiseStd^2) of shape {C',H,W}.
Tensor sample_input(Rng& rng, Index channels, Index height, Index width);

}  // namespace dipreg
