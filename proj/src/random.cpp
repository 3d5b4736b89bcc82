#include "dipreg/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dipreg {

double Rng::normal(double mean, double stddev) {
  if (stddev < 0.0) {
    throw std::invalid_argument("normal: stddev must be nonnegative");
  }
  double z;
  if (has_spare_) {
    z = spare_;
    has_spare_ = false;
  } else {
    // 1 - uniform() lies in (0, 1], keeping the log finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    z = r * std::cos(angle);
    spare_ = r * std::sin(angle);
    has_spare_ = true;
  }
  return mean + stddev * z;
}

Tensor sample_normal(Rng& rng, Shape shape, double mean, double stddev,
                     bool requires_grad) {
  ArrayXd data(shape_size(shape));
  for (Index i = 0; i < data.size(); ++i) data[i] = rng.normal(mean, stddev);
  return Tensor::leaf(std::move(shape), std::move(data), requires_grad);
}

}  // namespace dipreg
