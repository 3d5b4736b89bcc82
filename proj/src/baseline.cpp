#include "dipreg/baseline.hpp"

#include "dipreg/adam.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dipreg {

void BaselineConfig::validate() const {
  if (lambda < 0.0) {
    throw std::invalid_argument("baseline config: lambda must be >= 0");
  }
  if (iterations < 1) {
    throw std::invalid_argument("baseline config: iterations must be >= 1");
  }
  if (learning_rate <= 0.0) {
    throw std::invalid_argument(
        "baseline config: learning rate must be positive");
  }
  if (log_every < 1) {
    throw std::invalid_argument("baseline config: log_every must be >= 1");
  }
  if (patience < 0) {
    throw std::invalid_argument("baseline config: patience must be >= 0");
  }
}

Tensor smoothness_penalty(const Tensor& u) {
  if (u.shape().size() != 3 || u.dim(0) != 2) {
    throw std::invalid_argument("smoothness_penalty: field must be {2,H,W}");
  }
  const Index h = u.dim(1), w = u.dim(2);
  if (h < 2 || w < 2) {
    throw std::invalid_argument(
        "smoothness_penalty: needs at least 2x2 pixels");
  }
  const Index n = h * w;
  const double norm = 1.0 / (2.0 * static_cast<double>(n));

  double total = 0.0;
  for (Index c = 0; c < 2; ++c) {
    const double* f = u.values().data() + c * n;
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        if (x + 1 < w) {
          const double d = f[y * w + x + 1] - f[y * w + x];
          total += d * d;
        }
        if (y + 1 < h) {
          const double d = f[(y + 1) * w + x] - f[y * w + x];
          total += d * d;
        }
      }
    }
  }
  ArrayXd value(1);
  value[0] = norm * total;

  return make_op(
      "smoothness_penalty", {1}, std::move(value), {u},
      [h, w, n, norm](TensorNode& self) {
        const double g = 2.0 * norm * self.grad[0];
        ArrayXd& gin = self.parents[0].node()->ensure_grad();
        for (Index c = 0; c < 2; ++c) {
          const double* f = self.parents[0].values().data() + c * n;
          double* gf = gin.data() + c * n;
          for (Index y = 0; y < h; ++y) {
            for (Index x = 0; x < w; ++x) {
              if (x + 1 < w) {
                const double d = f[y * w + x + 1] - f[y * w + x];
                gf[y * w + x + 1] += g * d;
                gf[y * w + x] -= g * d;
              }
              if (y + 1 < h) {
                const double d = f[(y + 1) * w + x] - f[y * w + x];
                gf[(y + 1) * w + x] += g * d;
                gf[y * w + x] -= g * d;
              }
            }
          }
        }
      });
}

RunResult register_baseline(const ImagePair& pair,
                            const BaselineConfig& config) {
  pair.validate();
  config.validate();
  const Index h = pair.height(), w = pair.width();

  const auto start = std::chrono::steady_clock::now();
  const Tensor input = pair.input.detached();
  const Tensor target = pair.target.detached();
  const Tensor identity = identity_grid(h, w);

  std::vector<Tensor> params = {Tensor::zeros({2, h, w})};
  AdamState adam(params, {config.learning_rate, config.beta1, config.beta2,
                          config.epsilon});

  RunResult result;
  double best_loss = std::numeric_limits<double>::infinity();
  int best_age = 0;

  for (int iter = 0; iter < config.iterations; ++iter) {
    const Tensor& u = params[0];
    if (!u.values().allFinite()) {
      throw NumericalError(iter, "baseline: displacement became non-finite "
                                 "at iteration " + std::to_string(iter));
    }
    Tensor grid = identity + u;
    Tensor warped = warp(input, grid);
    Tensor objective = mae_loss(target, warped);
    if (config.lambda != 0.0) {
      objective = objective + config.lambda * smoothness_penalty(u);
    }

    const double loss_value = objective.item();
    if (!std::isfinite(loss_value)) {
      throw NumericalError(iter, "baseline: objective became non-finite at "
                                 "iteration " + std::to_string(iter));
    }
    if (iter % config.log_every == 0) {
      result.loss_curve.push_back({iter, loss_value});
    }

    const bool improved = loss_value < best_loss;
    if (improved) {
      best_loss = loss_value;
      best_age = 0;
    } else {
      ++best_age;
    }
    const bool last = iter + 1 == config.iterations ||
                      (config.patience > 0 && best_age >= config.patience);
    if ((improved && config.keep_best) || (last && !config.keep_best)) {
      result.displacement.u = u.detached();
      result.grid.phi = grid.detached();
      result.warped = warped.detached();
    }
    if (last) break;

    objective.backward();
    adam_step(params, adam);
  }

  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

}  // namespace dipreg
