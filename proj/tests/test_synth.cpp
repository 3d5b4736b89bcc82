#include "dipreg/synth.hpp"

#include "dipreg/metrics.hpp"

#include <doctest.h>

using namespace dipreg;

TEST_CASE("zero max displacement returns the identity pair") {
  SynthSpec spec;
  spec.height = 32;
  spec.width = 32;
  spec.max_displacement = 0.0;
  SynthPair sp = synth_pair(spec);
  CHECK((sp.pair.target.values() == sp.pair.input.values()).all());
  CHECK(sp.ground_truth.u.values().abs().maxCoeff() == 0.0);
}

TEST_CASE("emitted ground truth is always diffeomorphic") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    SynthSpec spec;
    spec.height = 48;
    spec.width = 48;
    spec.max_displacement = 6.0;
    spec.control_spacing = 12.0;
    spec.seed = seed;
    SynthPair sp = synth_pair(spec);
    const DiffeoStats stats =
        diffeo_stats(jacobian_det(deformation_from(sp.ground_truth)));
    CHECK(stats.negative_fraction == 0.0);
    // Control displacements bound the field.
    CHECK(sp.ground_truth.u.values().abs().maxCoeff() <=
          spec.max_displacement);
  }
}

TEST_CASE("textured pairs with real displacement differ from the base") {
  SynthSpec spec;
  spec.height = 48;
  spec.width = 48;
  spec.max_displacement = 3.0;
  spec.seed = 2;
  SynthPair sp = synth_pair(spec);
  CHECK(ssim(sp.pair.target, sp.pair.input) < 1.0);
  CHECK((sp.pair.target.values() - sp.pair.input.values()).abs().maxCoeff() >
        0.0);
}

TEST_CASE("generation is deterministic per seed") {
  SynthSpec spec;
  spec.height = 32;
  spec.width = 32;
  spec.max_displacement = 4.0;
  spec.seed = 9;
  SynthPair a = synth_pair(spec);
  SynthPair b = synth_pair(spec);
  CHECK((a.pair.target.values() == b.pair.target.values()).all());
  CHECK((a.ground_truth.u.values() == b.ground_truth.u.values()).all());

  spec.seed = 10;
  SynthPair c = synth_pair(spec);
  CHECK((a.pair.target.values() != c.pair.target.values()).any());
}

TEST_CASE("impossible displacement budgets are rejected with advice") {
  SynthSpec spec;
  spec.height = 32;
  spec.width = 32;
  SUBCASE("above the hard bound") {
    spec.max_displacement = 10.0;  // >= 32/4
    CHECK_THROWS_WITH_AS(synth_pair(spec), doctest::Contains("min(H,W)/4"),
                         std::invalid_argument);
  }
  SUBCASE("persistently folding fields") {
    // Tiny spacing, no smoothing, near-bound amplitude: every draw folds,
    // so the generator gives up with actionable advice.
    spec.max_displacement = 7.9;
    spec.control_spacing = 2.0;
    spec.smooth_sigma = 0.0;
    CHECK_THROWS_WITH_AS(synth_pair(spec), doctest::Contains("smaller max"),
                         std::runtime_error);
  }
}

TEST_CASE("patterns are textured, bounded and deterministic") {
  for (const char* id : {"blobs", "rings", "checker"}) {
    Rng rng(5);
    Tensor img = make_pattern(id, 40, 40, rng);
    CHECK(img.values().minCoeff() >= 0.0);
    CHECK(img.values().maxCoeff() <= 1.0);
    CHECK(img.values().maxCoeff() - img.values().minCoeff() > 0.5);
    Rng rng2(5);
    Tensor again = make_pattern(id, 40, 40, rng2);
    CHECK((img.values() == again.values()).all());
  }
  Rng rng(5);
  CHECK_THROWS_AS(make_pattern("plaid", 32, 32, rng), std::invalid_argument);
}

TEST_CASE("suite manifests parse and validate") {
  KeyValues kv = parse_key_values(
      "type = synth\ncount = 4\nheight = 64\nwidth = 48\n"
      "pattern = rings\nmax_displacement = 5\nseed = 11\n");
  SuiteManifest m = manifest_from_key_values(kv);
  CHECK(m.count == 4);
  CHECK(m.spec.height == 64);
  CHECK(m.spec.width == 48);
  CHECK(m.spec.pattern == "rings");
  CHECK(m.spec.max_displacement == 5.0);
  CHECK(m.spec.seed == 11);

  SUBCASE("missing type is rejected") {
    CHECK_THROWS_WITH_AS(
        manifest_from_key_values(parse_key_values("count = 2\n")),
        doctest::Contains("type = synth"), std::invalid_argument);
  }
  SUBCASE("unknown keys are rejected") {
    CHECK_THROWS_AS(manifest_from_key_values(
                        parse_key_values("type = synth\nbogus = 1\n")),
                    std::invalid_argument);
  }
}
