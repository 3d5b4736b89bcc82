#include "dipreg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dipreg {

double quantile(std::vector<double> values, double p) {
  if (values.empty()) {
    throw std::invalid_argument("quantile: empty sample");
  }
  if (p < 0.0 || p > 1.0) {
    throw std::invalid_argument("quantile: p must lie in [0,1]");
  }
  std::sort(values.begin(), values.end());
  const double rank = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  if (lo + 1 >= values.size()) return values.back();
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

}  // namespace dipreg
