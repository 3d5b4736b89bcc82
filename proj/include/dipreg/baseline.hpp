#pragma once

#include "dipreg/engine.hpp"

namespace dipreg {

/// Classical variational registration: gradient descent directly on the
/// displacement field with an explicit first-order smoothness penalty,
/// data term + lambda * penalty. The in-repo reference point the network
/// parameterization is compared against.
struct BaselineConfig {
  double lambda = 0.1;
  int iterations = 2000;
  double learning_rate = 1e-2;  // direct pixel parameterization takes a
                                // larger step than the generator
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  int log_every = 10;
  bool keep_best = false;
  int patience = 0;

  void validate() const;
};

/// Mean over pixels of the squared forward differences of both field
/// components, (dx^2 + dy^2)/2 summed over components: zero for constant
/// fields, 0.5 for a unit shear ramp on a large grid. Differentiable.
Tensor smoothness_penalty(const Tensor& u);

/// Minimizes mae(T, warp(I, x+u)) + lambda * smoothness_penalty(u) over a
/// free {2,H,W} field initialized to zero, with Adam. At lambda = 0 the
/// objective is exactly the engine's data term.
RunResult register_baseline(const ImagePair& pair,
                            const BaselineConfig& config);

}  // namespace dipreg
