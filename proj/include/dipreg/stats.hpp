#pragma once

#include <vector>

namespace dipreg {

/// Quantile by linear interpolation between order statistics: for p in
/// [0,1] the value at rank (n-1)*p, interpolating between neighbors.
/// Takes its argument by value and sorts it.
double quantile(std::vector<double> values, double p);

}  // namespace dipreg
