#pragma once

#include "dipreg/generator.hpp"
#include "dipreg/tensor.hpp"
#include "dipreg/warp.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dipreg {

/// Normalized grayscale input/target pair of identical shape {C,H,W},
/// intensities in [0,1].
struct ImagePair {
  Tensor input;   // I
  Tensor target;  // T

  Index channels() const { return input.dim(0); }
  Index height() const { return input.dim(1); }
  Index width() const { return input.dim(2); }
  void validate() const;
};

enum class LossKind { kMae };

struct RunConfig {
  int iterations = 2000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  GeneratorConfig generator;
  int log_every = 10;
  LossKind loss = LossKind::kMae;
  /// Report the best-loss snapshot instead of the final iteration.
  /// Off by default: the per-iteration loss is noisy because the noise
  /// input is resampled, and the final field is the method's output.
  bool keep_best = false;
  /// Stop after this many iterations without a new running-minimum loss;
  /// 0 disables early stopping.
  int patience = 0;

  void validate() const;
};

struct LossSample {
  int iteration = 0;
  double loss = 0.0;
};

struct RunResult {
  DisplacementField displacement;  // final u, {2,H,W}
  DeformationGrid grid;            // identity + u
  Tensor warped;                   // warp(I, grid), {C,H,W}
  std::vector<LossSample> loss_curve;
  double elapsed_seconds = 0.0;
};

/// Optimization diverged; `iteration` names the failing step.
struct NumericalError : std::runtime_error {
  NumericalError(int iteration, const std::string& what)
      : std::runtime_error(what), iteration(iteration) {}
  int iteration;
};

/// Mean absolute error between identically shaped tensors, as a scalar
/// graph node. The subgradient at exact ties is 0.
Tensor mae_loss(const Tensor& a, const Tensor& b);

/// Optimizes the generator parameters so that warping the input by
/// identity + f(z) matches the target under MAE. The noise z is resampled
/// every iteration; Adam drives the parameters. Deterministic per seed.
RunResult register_dip(const ImagePair& pair, const RunConfig& config);

/// 95th percentile of |u| produced by a fresh net on one noise draw.
/// Contract: < 0.5 px for the default configuration.
double initial_state_check(const GeneratorNet& net, const ImagePair& pair,
                           Rng& rng);

}  // namespace dipreg
