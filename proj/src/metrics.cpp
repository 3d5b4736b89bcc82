#include "dipreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dipreg {

namespace {

constexpr Index kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;
constexpr double kRange = 1.0;

ArrayXd gaussian_window() {
  ArrayXd w(kWindow);
  const double center = (kWindow - 1) / 2.0;
  for (Index i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - center;
    w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
  }
  return w / w.sum();
}

// Separable valid-mode filtering with the normalized Gaussian window:
// rows first, then columns. Output is (h-10) x (w-10).
ArrayXd filter_valid(const ArrayXd& img, Index h, Index w, const ArrayXd& g) {
  const Index hv = h - kWindow + 1, wv = w - kWindow + 1;
  ArrayXd rows(h * wv);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < wv; ++x) {
      double acc = 0.0;
      for (Index k = 0; k < kWindow; ++k) acc += g[k] * img[y * w + x + k];
      rows[y * wv + x] = acc;
    }
  }
  ArrayXd out(hv * wv);
  for (Index y = 0; y < hv; ++y) {
    for (Index x = 0; x < wv; ++x) {
      double acc = 0.0;
      for (Index k = 0; k < kWindow; ++k) acc += g[k] * rows[(y + k) * wv + x];
      out[y * wv + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 3 || a.dim(0) != 1 ||
      !shapes_equal(a.shape(), b.shape())) {
    throw std::invalid_argument("ssim: expected two {1,H,W} tensors of equal "
                                "shape, got " + shape_to_string(a.shape()) +
                                " and " + shape_to_string(b.shape()));
  }
  const Index h = a.dim(1), w = a.dim(2);
  if (h < kWindow || w < kWindow) {
    throw std::invalid_argument("ssim: images must be at least " +
                                std::to_string(kWindow) + "x" +
                                std::to_string(kWindow) + ", got " +
                                std::to_string(h) + "x" + std::to_string(w));
  }
  const ArrayXd g = gaussian_window();
  const ArrayXd& av = a.values();
  const ArrayXd& bv = b.values();

  const ArrayXd mu_a = filter_valid(av, h, w, g);
  const ArrayXd mu_b = filter_valid(bv, h, w, g);
  const ArrayXd m_aa = filter_valid(av * av, h, w, g);
  const ArrayXd m_bb = filter_valid(bv * bv, h, w, g);
  const ArrayXd m_ab = filter_valid(av * bv, h, w, g);

  const double c1 = (kK1 * kRange) * (kK1 * kRange);
  const double c2 = (kK2 * kRange) * (kK2 * kRange);

  const ArrayXd var_a = m_aa - mu_a * mu_a;
  const ArrayXd var_b = m_bb - mu_b * mu_b;
  const ArrayXd cov = m_ab - mu_a * mu_b;

  const ArrayXd map = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                      ((mu_a * mu_a + mu_b * mu_b + c1) *
                       (var_a + var_b + c2));
  return map.mean();
}

PairMetrics evaluate_pair(const ImagePair& pair, const RunResult& result,
                          const std::string& method_label) {
  PairMetrics m;
  m.method = method_label;
  m.ssim = ssim(pair.target, result.warped);
  const DiffeoStats stats = diffeo_stats(jacobian_det(result.grid));
  m.mean_detj = stats.mean;
  m.std_detj = stats.stddev;
  m.neg_frac = stats.negative_fraction;
  m.final_loss = (pair.target.values() - result.warped.values()).abs().mean();
  return m;
}

SummaryStats summarize(const std::vector<double>& values) {
  if (values.empty()) {
    throw std::invalid_argument("summarize: empty sample");
  }
  SummaryStats s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.q1 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q3 = quantile(values, 0.75);
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  s.mean = mean;
  s.stddev = std::sqrt(var);
  return s;
}

AggregateReport aggregate(const std::vector<PairMetrics>& metrics) {
  if (metrics.empty()) {
    throw std::invalid_argument("aggregate: no metrics rows");
  }
  std::map<std::string, std::map<std::string, std::vector<double>>> grouped;
  for (const PairMetrics& m : metrics) {
    auto& g = grouped[m.method];
    g["ssim"].push_back(m.ssim);
    g["mean_detj"].push_back(m.mean_detj);
    g["std_detj"].push_back(m.std_detj);
    g["neg_frac"].push_back(m.neg_frac);
    g["final_loss"].push_back(m.final_loss);
  }
  AggregateReport report;
  for (const auto& [method, per_metric] : grouped) {
    report.counts[method] = per_metric.begin()->second.size();
    for (const auto& [name, values] : per_metric) {
      report.by_method[method][name] = summarize(values);
    }
  }
  return report;
}

}  // namespace dipreg
