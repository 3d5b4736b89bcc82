#include "dipreg/engine.hpp"

#include "dipreg/adam.hpp"
#include "dipreg/nn.hpp"
#include "dipreg/stats.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace dipreg {

void ImagePair::validate() const {
  if (!input.defined() || !target.defined() ||
      input.shape().size() != 3 || target.shape().size() != 3) {
    throw std::invalid_argument("image pair: input and target must be {C,H,W}");
  }
  if (!shapes_equal(input.shape(), target.shape())) {
    throw std::invalid_argument("image pair: shapes differ, " +
                                shape_to_string(input.shape()) + " vs " +
                                shape_to_string(target.shape()));
  }
  const auto in_range = [](const Tensor& t) {
    return (t.values() >= 0.0).all() && (t.values() <= 1.0).all();
  };
  if (!in_range(input) || !in_range(target)) {
    throw std::invalid_argument("image pair: intensities must lie in [0,1]");
  }
}

void RunConfig::validate() const {
  if (iterations < 1) {
    throw std::invalid_argument("run config: iterations must be >= 1");
  }
  if (learning_rate <= 0.0) {
    throw std::invalid_argument("run config: learning rate must be positive");
  }
  if (log_every < 1) {
    throw std::invalid_argument("run config: log_every must be >= 1");
  }
  if (patience < 0) {
    throw std::invalid_argument("run config: patience must be >= 0");
  }
  generator.validate();
}

Tensor mae_loss(const Tensor& a, const Tensor& b) {
  if (!shapes_equal(a.shape(), b.shape())) {
    throw std::invalid_argument("mae_loss: shape mismatch " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
  return mean(abs(a - b));
}

RunResult register_dip(const ImagePair& pair, const RunConfig& config) {
  pair.validate();
  config.validate();
  const Index h = pair.height(), w = pair.width();
  const Index div = config.generator.divisibility();
  if (h % div != 0 || w % div != 0) {
    throw std::invalid_argument(
        "register: image size " + std::to_string(h) + "x" +
        std::to_string(w) + " must be divisible by " + std::to_string(div) +
        "; pad the pair first");
  }

  const auto start = std::chrono::steady_clock::now();
  Rng rng(config.seed);
  GeneratorNet net = GeneratorNet::init_params(config.generator, rng);
  AdamState adam(net.params(), {config.learning_rate, config.beta1,
                                config.beta2, config.epsilon});

  const Tensor input = pair.input.detached();
  const Tensor target = pair.target.detached();
  const Tensor identity = identity_grid(h, w);

  RunResult result;
  double best_loss = std::numeric_limits<double>::infinity();
  int best_age = 0;

  for (int iter = 0; iter < config.iterations; ++iter) {
    Tensor z = sample_input(rng, config.generator.input_channels, h, w);
    Tensor u = net.forward(z);
    if (!u.values().allFinite()) {
      throw NumericalError(iter, "register: displacement became non-finite "
                                 "at iteration " + std::to_string(iter));
    }
    Tensor grid = identity + u;
    Tensor warped = warp(input, grid);
    Tensor loss = mae_loss(target, warped);

    const double loss_value = loss.item();
    if (!std::isfinite(loss_value)) {
      throw NumericalError(iter, "register: loss became non-finite at "
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

    loss.backward();
    adam_step(net.params(), adam);
  }

  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

double initial_state_check(const GeneratorNet& net, const ImagePair& pair,
                           Rng& rng) {
  pair.validate();
  Tensor z = sample_input(rng, net.config().input_channels, pair.height(),
                          pair.width());
  Tensor u = net.forward(z);
  std::vector<double> magnitudes(u.values().size());
  for (Index i = 0; i < u.values().size(); ++i) {
    magnitudes[i] = std::abs(u.values()[i]);
  }
  return quantile(magnitudes, 0.95);
}

}  // namespace dipreg
