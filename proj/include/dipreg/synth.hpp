#pragma once

#include "dipreg/config.hpp"
#include "dipreg/engine.hpp"
#include "dipreg/random.hpp"
#include "dipreg/warp.hpp"

#include <filesystem>
#include <string>

namespace dipreg {

/// Recipe for a synthetic registration pair with known ground truth.
struct SynthSpec {
  Index height = 128;
  Index width = 128;
  /// Built-in base pattern: blobs, rings or checker.
  std::string pattern = "blobs";
  /// Optional base image path; overrides `pattern` when non-empty.
  std::filesystem::path base_image;
  double control_spacing = 16.0;   // px between control points
  double max_displacement = 8.0;   // px, bound on control displacements
  double smooth_sigma = 8.0;       // px, Gaussian smoothing of the grid
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthPair {
  ImagePair pair;                  // T = warp(I, identity + ground_truth)
  DisplacementField ground_truth;  // diffeomorphic by construction
};

/// Deterministic textured base image in [0,1].
Tensor make_pattern(const std::string& id, Index height, Index width,
                    Rng& rng);

/// Draws a random control grid (components uniform in +-max_displacement),
/// Gaussian-smooths it, upsamples bilinearly to pixel resolution and
/// verifies det J > 0 everywhere, redrawing up to 10 times. The target is
/// the base image warped by the resulting field.
SynthPair synth_pair(const SynthSpec& spec);

/// Synthetic benchmark suite description parsed from a flat key-value
/// manifest with `type = synth`; pair i uses seed `spec.seed + i`.
struct SuiteManifest {
  int count = 10;
  SynthSpec spec;
};

SuiteManifest manifest_from_key_values(const KeyValues& kv);

}  // namespace dipreg
