#include "dipreg/report.hpp"

#include <json.hpp>

#include <sstream>

namespace dipreg {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json stats_to_json(const SummaryStats& s) {
  return ordered_json{{"min", s.min},   {"q1", s.q1},
                      {"median", s.median}, {"q3", s.q3},
                      {"max", s.max},   {"mean", s.mean},
                      {"std", s.stddev}};
}

// Shortest round-trip formatting, matching the JSON emitter.
std::string format_double(double v) {
  return ordered_json(v).dump();
}

}  // namespace

std::string metrics_to_json(const PairMetrics& m) {
  ordered_json j{{"method", m.method},
                 {"ssim", m.ssim},
                 {"mean_detj", m.mean_detj},
                 {"std_detj", m.std_detj},
                 {"neg_frac", m.neg_frac},
                 {"final_loss", m.final_loss}};
  return j.dump(2) + "\n";
}

std::string report_to_json(const AggregateReport& report) {
  ordered_json summary;
  for (const auto& [method, metrics] : report.by_method) {
    const SummaryStats& ssim = metrics.at("ssim");
    const SummaryStats& detj = metrics.at("mean_detj");
    summary[method] = ordered_json{{"pairs", report.counts.at(method)},
                                   {"ssim_mean", ssim.mean},
                                   {"ssim_std", ssim.stddev},
                                   {"detj_mean", detj.mean},
                                   {"detj_std", detj.stddev}};
  }
  ordered_json detail;
  for (const auto& [method, metrics] : report.by_method) {
    ordered_json per_metric;
    for (const auto& [name, stats] : metrics) {
      per_metric[name] = stats_to_json(stats);
    }
    detail[method] = per_metric;
  }
  ordered_json j{{"summary", summary}, {"metrics", detail}};
  return j.dump(2) + "\n";
}

std::string loss_curve_to_csv(const std::vector<LossSample>& curve) {
  std::string out = "iteration,loss\n";
  for (const LossSample& s : curve) {
    out += std::to_string(s.iteration) + "," + format_double(s.loss) + "\n";
  }
  return out;
}

std::string bench_rows_to_csv(const std::vector<BenchRow>& rows) {
  std::string out =
      "pair,method,ssim,mean_detj,std_detj,neg_frac,final_loss,error\n";
  for (const BenchRow& r : rows) {
    out += r.pair_name + "," + r.method + ",";
    if (r.metrics) {
      const PairMetrics& m = *r.metrics;
      out += format_double(m.ssim) + "," + format_double(m.mean_detj) + "," +
             format_double(m.std_detj) + "," + format_double(m.neg_frac) +
             "," + format_double(m.final_loss) + ",";
    } else {
      out += ",,,,,";
    }
    // Commas in error text would break the row shape.
    std::string err = r.error;
    for (char& c : err) {
      if (c == ',' || c == '\n') c = ';';
    }
    out += err + "\n";
  }
  return out;
}

}  // namespace dipreg
