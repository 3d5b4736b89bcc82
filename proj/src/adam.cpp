#include "dipreg/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace dipreg {

AdamState::AdamState(const std::vector<Tensor>& params, AdamConfig config)
    : config_(config) {
  if (config.learning_rate <= 0.0) {
    throw std::invalid_argument("adam: learning rate must be positive");
  }
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor& p : params) {
    m_.push_back(ArrayXd::Zero(p.size()));
    v_.push_back(ArrayXd::Zero(p.size()));
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (params.size() != state.m_.size()) {
    throw std::invalid_argument("adam_step: parameter count " +
                                std::to_string(params.size()) +
                                " does not match state (" +
                                std::to_string(state.m_.size()) + ")");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                  " has no accumulated gradient");
    }
    if (params[i].size() != state.m_[i].size()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                  " shape does not match optimizer state");
    }
  }

  const AdamConfig& c = state.config_;
  const std::int64_t t = state.step_ + 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));

  for (std::size_t i = 0; i < params.size(); ++i) {
    const ArrayXd& g = params[i].grad();
    ArrayXd& m = state.m_[i];
    ArrayXd& v = state.v_[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.square();
    params[i].mutable_values() -=
        c.learning_rate * (m / bc1) / ((v / bc2).sqrt() + c.epsilon);
    params[i].zero_grad();
  }
  state.step_ = t;
}

}  // namespace dipreg
