#include "dipreg/metrics.hpp"

#include "dipreg/random.hpp"
#include "dipreg/synth.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace dipreg;

namespace {

// Brute-force SSIM oracle: the direct formula per window position with an
// explicit (non-separable) 11x11 Gaussian weight matrix and centered
// variance sums. Independent of the separable moment-map implementation.
double ssim_oracle(const Tensor& a, const Tensor& b) {
  const Index h = a.dim(1), w = a.dim(2);
  const Index win = 11;
  double weights[11][11];
  double wsum = 0.0;
  for (Index i = 0; i < win; ++i) {
    for (Index j = 0; j < win; ++j) {
      const double dy = static_cast<double>(i) - 5.0;
      const double dx = static_cast<double>(j) - 5.0;
      weights[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
      wsum += weights[i][j];
    }
  }
  for (Index i = 0; i < win; ++i)
    for (Index j = 0; j < win; ++j) weights[i][j] /= wsum;

  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  Index windows = 0;
  for (Index y = 0; y + win <= h; ++y) {
    for (Index x = 0; x + win <= w; ++x) {
      double mu_a = 0.0, mu_b = 0.0;
      for (Index i = 0; i < win; ++i)
        for (Index j = 0; j < win; ++j) {
          mu_a += weights[i][j] * a.at(0, y + i, x + j);
          mu_b += weights[i][j] * b.at(0, y + i, x + j);
        }
      double va = 0.0, vb = 0.0, cov = 0.0;
      for (Index i = 0; i < win; ++i)
        for (Index j = 0; j < win; ++j) {
          const double da = a.at(0, y + i, x + j) - mu_a;
          const double db = b.at(0, y + i, x + j) - mu_b;
          va += weights[i][j] * da * da;
          vb += weights[i][j] * db * db;
          cov += weights[i][j] * da * db;
        }
      total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

Tensor random_image(Rng& rng, Index h, Index w) {
  ArrayXd v(h * w);
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform();
  return Tensor::constant({1, h, w}, std::move(v));
}

}  // namespace

TEST_CASE("ssim of an image with itself is exactly 1") {
  Rng rng(2);
  Tensor a = random_image(rng, 16, 16);
  CHECK(ssim(a, a) == 1.0);
}

TEST_CASE("constant images follow the closed-form luminance term") {
  Tensor a = Tensor::full({1, 12, 12}, 0.2, false);
  Tensor b = Tensor::full({1, 12, 12}, 0.8, false);
  const double c1 = 1e-4;
  const double expected = (2.0 * 0.2 * 0.8 + c1) /
                          (0.2 * 0.2 + 0.8 * 0.8 + c1);
  CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("windowed ssim matches the brute-force oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 12; ++trial) {
    Tensor a = random_image(rng, 16, 16);
    Tensor b = random_image(rng, 16, 16);
    CHECK(ssim(a, b) == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-6));
  }
}

TEST_CASE("ssim is symmetric and bounded by 1") {
  Rng rng(78);
  for (int trial = 0; trial < 6; ++trial) {
    Tensor a = random_image(rng, 14, 18);
    Tensor b = random_image(rng, 14, 18);
    const double ab = ssim(a, b);
    CHECK(std::abs(ab - ssim(b, a)) < 1e-12);
    CHECK(ab <= 1.0);
    CHECK(ab < 1.0);  // distinct random images are not identical
  }
}

TEST_CASE("ssim rejects images smaller than its window") {
  Tensor tiny = Tensor::zeros({1, 10, 16});
  CHECK_THROWS_WITH_AS(ssim(tiny, tiny), doctest::Contains("11"),
                       std::invalid_argument);
}

TEST_CASE("evaluate_pair on an identity result") {
  Rng rng(3);
  Tensor image = make_pattern("blobs", 24, 24, rng);
  ImagePair pair{image, image};
  RunResult result;
  result.displacement.u = Tensor::zeros({2, 24, 24}, false);
  result.grid.phi = identity_grid(24, 24);
  result.warped = image;

  PairMetrics m = evaluate_pair(pair, result, "dip");
  CHECK(m.method == "dip");
  CHECK(m.ssim == 1.0);
  CHECK(m.mean_detj == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.neg_frac == 0.0);
  CHECK(m.final_loss == 0.0);
}

TEST_CASE("quantiles interpolate order statistics") {
  CHECK(quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({1, 2, 3, 4}, 0.75) == doctest::Approx(3.25));
  CHECK(quantile({5}, 0.5) == 5.0);
  CHECK(quantile({3, 1, 2}, 0.0) == 1.0);
  CHECK(quantile({3, 1, 2}, 1.0) == 3.0);
  CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
}

TEST_CASE("aggregate groups by method and is permutation invariant") {
  std::vector<PairMetrics> rows;
  for (int i = 0; i < 4; ++i) {
    PairMetrics m;
    m.method = "dip";
    m.ssim = 1.0 + i;  // 1, 2, 3, 4
    m.mean_detj = 0.9 + 0.1 * i;
    rows.push_back(m);
  }
  PairMetrics other;
  other.method = "baseline";
  other.ssim = 0.5;
  rows.push_back(other);

  AggregateReport report = aggregate(rows);
  CHECK(report.counts.at("dip") == 4);
  CHECK(report.counts.at("baseline") == 1);
  const SummaryStats& s = report.by_method.at("dip").at("ssim");
  CHECK(s.median == doctest::Approx(2.5));
  CHECK(s.q1 == doctest::Approx(1.75));
  CHECK(s.q3 == doctest::Approx(3.25));
  CHECK(s.min == 1.0);
  CHECK(s.max == 4.0);
  CHECK(s.mean == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(s.stddev == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));

  SUBCASE("single-element group collapses all quantiles") {
    const SummaryStats& b = report.by_method.at("baseline").at("ssim");
    CHECK(b.min == 0.5);
    CHECK(b.q1 == 0.5);
    CHECK(b.median == 0.5);
    CHECK(b.q3 == 0.5);
    CHECK(b.max == 0.5);
  }
  SUBCASE("permuting rows changes nothing") {
    std::vector<PairMetrics> shuffled = rows;
    std::mt19937 gen(4);
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    AggregateReport again = aggregate(shuffled);
    CHECK(again.by_method.at("dip").at("ssim").median == s.median);
    CHECK(again.by_method.at("dip").at("mean_detj").mean ==
          doctest::Approx(report.by_method.at("dip").at("mean_detj").mean)
              .epsilon(1e-15));
  }
  SUBCASE("empty input is rejected") {
    CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
  }
}
