#pragma once

#include "dipreg/engine.hpp"
#include "dipreg/metrics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dipreg {

/// Deterministic JSON for one pair's metrics: same inputs, same bytes.
std::string metrics_to_json(const PairMetrics& metrics);

/// Aggregate report JSON: a `summary` section per method with SSIM and
/// det J as mean +- std, plus full boxplot statistics per metric.
std::string report_to_json(const AggregateReport& report);

/// loss-curve CSV rows: header `iteration,loss`.
std::string loss_curve_to_csv(const std::vector<LossSample>& curve);

/// One row per (pair, method); `error` is the failure reason when a run
/// aborted, with the metric columns left empty.
struct BenchRow {
  std::string pair_name;
  std::string method;
  std::optional<PairMetrics> metrics;
  std::string error;
};

std::string bench_rows_to_csv(const std::vector<BenchRow>& rows);

}  // namespace dipreg
