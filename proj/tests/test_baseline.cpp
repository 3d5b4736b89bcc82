#include "dipreg/baseline.hpp"

#include "dipreg/metrics.hpp"
#include "dipreg/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace dipreg;

namespace {

// Discrete oracle for the smoothness penalty: literal sum over forward
// differences with the (dx^2 + dy^2)/2-per-pixel normalization.
double penalty_oracle(const Tensor& u) {
  const Index h = u.dim(1), w = u.dim(2);
  double total = 0.0;
  for (Index c = 0; c < 2; ++c) {
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        if (x + 1 < w) {
          const double d = u.at(c, y, x + 1) - u.at(c, y, x);
          total += d * d;
        }
        if (y + 1 < h) {
          const double d = u.at(c, y + 1, x) - u.at(c, y, x);
          total += d * d;
        }
      }
    }
  }
  return total / (2.0 * static_cast<double>(h * w));
}

ImagePair self_pair(Index size, std::uint64_t seed) {
  Rng rng(seed);
  Tensor image = make_pattern("blobs", size, size, rng);
  return ImagePair{image, image};
}

}  // namespace

TEST_CASE("smoothness penalty values") {
  SUBCASE("constant fields cost nothing") {
    CHECK(smoothness_penalty(Tensor::full({2, 5, 5}, 3.7)).item() == 0.0);
  }
  SUBCASE("unit shear ramp approaches 0.5 on large grids") {
    // u_x(x,y) = x, u_y = 0: the discrete oracle gives (W-1)/(2W).
    const Index h = 64, w = 64;
    ArrayXd data = ArrayXd::Zero(2 * h * w);
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x)
        data[y * w + x] = static_cast<double>(x);
    Tensor u = Tensor::leaf({2, h, w}, data);
    const double expected = (static_cast<double>(w) - 1.0) /
                            (2.0 * static_cast<double>(w));
    CHECK(smoothness_penalty(u).item() ==
          doctest::Approx(expected).epsilon(1e-14));
    CHECK(smoothness_penalty(u).item() ==
          doctest::Approx(penalty_oracle(u)).epsilon(1e-14));
    CHECK(std::abs(smoothness_penalty(u).item() - 0.5) < 0.01);
  }
  SUBCASE("doubling the field quadruples the penalty") {
    Rng rng(8);
    Tensor u = sample_normal(rng, {2, 6, 7}, 0.0, 1.0);
    Tensor u2 = Tensor::constant({2, 6, 7}, 2.0 * u.values());
    CHECK(smoothness_penalty(u2).item() ==
          doctest::Approx(4.0 * smoothness_penalty(u).item())
              .epsilon(1e-12));
  }
  SUBCASE("random fields match the discrete oracle") {
    Rng rng(9);
    for (int trial = 0; trial < 5; ++trial) {
      Tensor u = sample_normal(rng, {2, 5, 8}, 0.0, 2.0);
      CHECK(smoothness_penalty(u).item() ==
            doctest::Approx(penalty_oracle(u)).epsilon(1e-12));
    }
  }
  SUBCASE("translation invariance and strict positivity") {
    Rng rng(10);
    Tensor u = sample_normal(rng, {2, 6, 6}, 0.0, 1.0);
    Tensor shifted = Tensor::constant({2, 6, 6}, u.values() + 42.0);
    CHECK(smoothness_penalty(shifted).item() ==
          doctest::Approx(smoothness_penalty(u).item()).epsilon(1e-12));
    CHECK(smoothness_penalty(u).item() > 0.0);
  }
}

TEST_CASE("huge lambda forces a near-constant field on a self pair") {
  ImagePair pair = self_pair(32, 20);
  BaselineConfig config;
  config.lambda = 1e6;
  config.iterations = 300;
  RunResult result = register_baseline(pair, config);
  const ArrayXd& u = result.displacement.u.values();
  // Penalty dominates: the field collapses toward a constant, and the
  // data term pins that constant near zero on a self pair.
  CHECK(u.abs().maxCoeff() < 0.05);
}

TEST_CASE("lambda = 0 reduces to the engine's data term") {
  ImagePair pair = self_pair(32, 21);
  BaselineConfig config;
  config.lambda = 0.0;
  config.iterations = 3;
  RunResult result = register_baseline(pair, config);
  // First logged objective is exactly mae(T, warp(I, x+0)) = mae(T, I).
  const double mae0 =
      (pair.target.values() - pair.input.values()).abs().mean();
  CHECK(result.loss_curve.front().loss == mae0);
}

TEST_CASE("baseline runs are deterministic") {
  SynthSpec spec;
  spec.height = 32;
  spec.width = 32;
  spec.max_displacement = 3.0;
  spec.seed = 5;
  SynthPair sp = synth_pair(spec);

  BaselineConfig config;
  config.iterations = 80;
  RunResult a = register_baseline(sp.pair, config);
  RunResult b = register_baseline(sp.pair, config);
  CHECK((a.displacement.u.values() == b.displacement.u.values()).all());
  CHECK((a.warped.values() == b.warped.values()).all());
}

TEST_CASE("regularization trades data fit for smoother Jacobians") {
  // A crinkly ground truth (tight control grid, little smoothing) makes
  // the penalty bind; on very smooth fields it can even help the fit.
  SynthSpec spec;
  spec.height = 48;
  spec.width = 48;
  spec.max_displacement = 4.0;
  spec.control_spacing = 10.0;
  spec.smooth_sigma = 5.0;
  spec.seed = 6;
  SynthPair sp = synth_pair(spec);

  BaselineConfig free;
  free.lambda = 0.0;
  free.iterations = 400;
  BaselineConfig regularized = free;
  regularized.lambda = 0.1;

  RunResult run_free = register_baseline(sp.pair, free);
  RunResult run_reg = register_baseline(sp.pair, regularized);

  const double mae_free =
      (sp.pair.target.values() - run_free.warped.values()).abs().mean();
  const double mae_reg =
      (sp.pair.target.values() - run_reg.warped.values()).abs().mean();
  CHECK(mae_free <= mae_reg);  // unconstrained fit is at least as tight

  const DiffeoStats stats_free = diffeo_stats(jacobian_det(run_free.grid));
  const DiffeoStats stats_reg = diffeo_stats(jacobian_det(run_reg.grid));
  CHECK(stats_free.stddev > stats_reg.stddev);

  // The objective's running minimum never increases.
  double best = std::numeric_limits<double>::infinity();
  for (const LossSample& s : run_reg.loss_curve) {
    CHECK(std::min(best, s.loss) <= best);
    best = std::min(best, s.loss);
  }
}

TEST_CASE("baseline improves over no registration on a synthetic pair") {
  SynthSpec spec;
  spec.height = 48;
  spec.width = 48;
  spec.max_displacement = 4.0;
  spec.seed = 7;
  SynthPair sp = synth_pair(spec);

  BaselineConfig config;
  config.iterations = 500;
  RunResult result = register_baseline(sp.pair, config);
  const double before =
      (sp.pair.target.values() - sp.pair.input.values()).abs().mean();
  const double after =
      (sp.pair.target.values() - result.warped.values()).abs().mean();
  CHECK(after < before);
}

TEST_CASE("baseline config validation") {
  BaselineConfig config;
  config.lambda = -0.5;
  ImagePair pair = self_pair(32, 22);
  CHECK_THROWS_AS(register_baseline(pair, config), std::invalid_argument);
  config.lambda = 0.1;
  config.iterations = 0;
  CHECK_THROWS_AS(register_baseline(pair, config), std::invalid_argument);
}
