#pragma once

#include "dipreg/engine.hpp"
#include "dipreg/stats.hpp"

#include <map>
#include <string>
#include <vector>

namespace dipreg {

/// Per-pair evaluation row.
struct PairMetrics {
  std::string method;
  double ssim = 0.0;
  double mean_detj = 0.0;
  double std_detj = 0.0;
  double neg_frac = 0.0;
  double final_loss = 0.0;
};

struct SummaryStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  double mean = 0.0, stddev = 0.0;  // population std
};

SummaryStats summarize(const std::vector<double>& values);

/// Boxplot-style statistics per metric, grouped by method label.
struct AggregateReport {
  // method -> metric name -> stats; metric names: ssim, mean_detj,
  // std_detj, neg_frac, final_loss.
  std::map<std::string, std::map<std::string, SummaryStats>> by_method;
  std::map<std::string, std::size_t> counts;
};

/// Mean structural similarity over sliding 11x11 Gaussian windows
/// (sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1) of two {1,H,W}
/// images with values in [0,1]. Needs H, W >= 11.
double ssim(const Tensor& a, const Tensor& b);

/// SSIM, Jacobian statistics and final data loss for one finished run.
PairMetrics evaluate_pair(const ImagePair& pair, const RunResult& result,
                          const std::string& method_label);

AggregateReport aggregate(const std::vector<PairMetrics>& metrics);

}  // namespace dipreg
