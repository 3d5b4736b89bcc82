#pragma once

#include "dipreg/tensor.hpp"

#include <cstdint>
#include <vector>

namespace dipreg {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second-moment buffers for one fixed parameter list.
class AdamState {
 public:
  AdamState(const std::vector<Tensor>& params, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_; }
  const ArrayXd& first_moment(std::size_t i) const { return m_.at(i); }
  const ArrayXd& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<ArrayXd> m_, v_;

  friend void adam_step(std::vector<Tensor>& params, AdamState& state);
};

/// One bias-corrected Adam update. Every parameter must carry an
/// accumulated gradient; gradients are zeroed after the update and the
/// step count increments by one.
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace dipreg
