// Finite-difference gradient oracle, independent of the backward pass it
// checks: builds the graph twice per perturbed element and compares the
// central difference against the accumulated analytic gradient.
#pragma once

#include "dipreg/tensor.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace dipreg::testing {

struct GradCheckResult {
  double max_rel_err = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// `fn` must map the given leaves to a scalar tensor; it is re-invoked for
// every probe, reading whatever values the leaves hold at that moment.
inline GradCheckResult grad_check(
    std::vector<Tensor> leaves,
    const std::function<Tensor(const std::vector<Tensor>&)>& fn,
    double step = 1e-5) {
  for (Tensor& leaf : leaves) leaf.zero_grad();
  fn(leaves).backward();

  std::vector<ArrayXd> analytic;
  analytic.reserve(leaves.size());
  for (const Tensor& leaf : leaves) {
    analytic.push_back(leaf.has_grad() ? leaf.grad()
                                       : ArrayXd::Zero(leaf.size()));
  }

  GradCheckResult result;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor& leaf = leaves[li];
    if (!leaf.requires_grad()) continue;
    for (Index i = 0; i < leaf.size(); ++i) {
      const double original = leaf.values()[i];
      leaf.mutable_values()[i] = original + step;
      const double fp = fn(leaves).item();
      leaf.mutable_values()[i] = original - step;
      const double fm = fn(leaves).item();
      leaf.mutable_values()[i] = original;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[li][i];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-6});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace dipreg::testing
