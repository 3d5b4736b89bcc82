#include "dipreg/synth.hpp"

#include "dipreg/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dipreg {

void SynthSpec::validate() const {
  if (base_image.empty() && (height < 16 || width < 16)) {
    throw std::invalid_argument("synth: image must be at least 16x16");
  }
  if (control_spacing < 2.0) {
    throw std::invalid_argument("synth: control spacing must be >= 2 px");
  }
  if (max_displacement < 0.0) {
    throw std::invalid_argument("synth: max displacement must be >= 0");
  }
  if (smooth_sigma < 0.0) {
    throw std::invalid_argument("synth: smoothing sigma must be >= 0");
  }
}

namespace {

Tensor normalize_pattern(ArrayXd values, Index h, Index w) {
  const double lo = values.minCoeff(), hi = values.maxCoeff();
  if (hi - lo < 1e-12) {
    values.setConstant(0.5);
  } else {
    values = 0.05 + 0.9 * (values - lo) / (hi - lo);
  }
  return Tensor::constant({1, h, w}, std::move(values));
}

ArrayXd blob_field(Index h, Index w, Rng& rng) {
  ArrayXd img = ArrayXd::Zero(h * w);
  const double scale = static_cast<double>(std::min(h, w));
  const int blobs = 14;
  for (int b = 0; b < blobs; ++b) {
    const double cx = rng.uniform() * static_cast<double>(w - 1);
    const double cy = rng.uniform() * static_cast<double>(h - 1);
    const double sigma = scale * (0.06 + 0.14 * rng.uniform());
    const double amp = (rng.uniform() < 0.5 ? -1.0 : 1.0) *
                       (0.5 + 0.5 * rng.uniform());
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        const double dx = static_cast<double>(x) - cx;
        const double dy = static_cast<double>(y) - cy;
        img[y * w + x] += amp * std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
  }
  return img;
}

ArrayXd ring_field(Index h, Index w, Rng& rng) {
  ArrayXd img(h * w);
  const double cx = (0.3 + 0.4 * rng.uniform()) * static_cast<double>(w - 1);
  const double cy = (0.3 + 0.4 * rng.uniform()) * static_cast<double>(h - 1);
  const double period = 12.0 + 12.0 * rng.uniform();
  const double phase = 2.0 * std::numbers::pi * rng.uniform();
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      const double r = std::sqrt(dx * dx + dy * dy);
      img[y * w + x] =
          std::sin(2.0 * std::numbers::pi * r / period + phase);
    }
  }
  return img;
}

ArrayXd checker_field(Index h, Index w, Rng& rng) {
  ArrayXd img(h * w);
  const double period = 8.0 + 8.0 * rng.uniform();
  const double ox = period * rng.uniform();
  const double oy = period * rng.uniform();
  const double f = std::numbers::pi / period;
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      img[y * w + x] = std::sin(f * (static_cast<double>(x) + ox)) *
                       std::sin(f * (static_cast<double>(y) + oy));
    }
  }
  return img;
}

// Separable Gaussian smoothing of a coarse grid (one component), with
// kernel renormalized over in-range taps at the borders.
void smooth_grid(ArrayXd& grid, Index rows, Index cols, double sigma) {
  if (sigma < 1e-9) return;
  const Index radius = std::max<Index>(1, static_cast<Index>(
      std::ceil(3.0 * sigma)));
  ArrayXd kernel(2 * radius + 1);
  for (Index i = 0; i < kernel.size(); ++i) {
    const double d = static_cast<double>(i - radius);
    kernel[i] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  ArrayXd tmp(rows * cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      double acc = 0.0, wsum = 0.0;
      for (Index k = -radius; k <= radius; ++k) {
        const Index cc = c + k;
        if (cc < 0 || cc >= cols) continue;
        acc += kernel[k + radius] * grid[r * cols + cc];
        wsum += kernel[k + radius];
      }
      tmp[r * cols + c] = acc / wsum;
    }
  }
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) {
      double acc = 0.0, wsum = 0.0;
      for (Index k = -radius; k <= radius; ++k) {
        const Index rr = r + k;
        if (rr < 0 || rr >= rows) continue;
        acc += kernel[k + radius] * tmp[rr * cols + c];
        wsum += kernel[k + radius];
      }
      grid[r * cols + c] = acc / wsum;
    }
  }
}

// Control lattice with one ring of points outside each border; pixel y
// maps to lattice coordinate y/spacing + 1.
Tensor draw_field(Index h, Index w, const SynthSpec& spec, Rng& rng) {
  const double spacing = spec.control_spacing;
  const Index rows =
      static_cast<Index>(std::ceil(static_cast<double>(h - 1) / spacing)) + 3;
  const Index cols =
      static_cast<Index>(std::ceil(static_cast<double>(w - 1) / spacing)) + 3;
  const double sigma_c = spec.smooth_sigma / spacing;

  ArrayXd field(2 * h * w);
  for (int comp = 0; comp < 2; ++comp) {
    ArrayXd coarse(rows * cols);
    for (Index i = 0; i < coarse.size(); ++i) {
      coarse[i] = spec.max_displacement * (2.0 * rng.uniform() - 1.0);
    }
    smooth_grid(coarse, rows, cols, sigma_c);
    double* dst = field.data() + comp * h * w;
    for (Index y = 0; y < h; ++y) {
      const double fy = static_cast<double>(y) / spacing + 1.0;
      const Index r0 = static_cast<Index>(std::floor(fy));
      const double ty = fy - static_cast<double>(r0);
      for (Index x = 0; x < w; ++x) {
        const double fx = static_cast<double>(x) / spacing + 1.0;
        const Index c0 = static_cast<Index>(std::floor(fx));
        const double tx = fx - static_cast<double>(c0);
        const double top = (1.0 - tx) * coarse[r0 * cols + c0] +
                           tx * coarse[r0 * cols + c0 + 1];
        const double bot = (1.0 - tx) * coarse[(r0 + 1) * cols + c0] +
                           tx * coarse[(r0 + 1) * cols + c0 + 1];
        dst[y * w + x] = (1.0 - ty) * top + ty * bot;
      }
    }
  }
  return Tensor::constant({2, h, w}, std::move(field));
}

}  // namespace

Tensor make_pattern(const std::string& id, Index height, Index width,
                    Rng& rng) {
  ArrayXd raw;
  if (id == "blobs") {
    raw = blob_field(height, width, rng);
  } else if (id == "rings") {
    raw = ring_field(height, width, rng);
  } else if (id == "checker") {
    raw = checker_field(height, width, rng);
  } else {
    throw std::invalid_argument("synth: unknown pattern '" + id +
                                "'; expected blobs, rings or checker");
  }
  return normalize_pattern(std::move(raw), height, width);
}

SynthPair synth_pair(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  Tensor base;
  if (!spec.base_image.empty()) {
    base = load_image(spec.base_image);
  } else {
    base = make_pattern(spec.pattern, spec.height, spec.width, rng);
  }
  const Index h = base.dim(1), w = base.dim(2);
  if (spec.max_displacement >= static_cast<double>(std::min(h, w)) / 4.0) {
    throw std::invalid_argument(
        "synth: max displacement " + std::to_string(spec.max_displacement) +
        " must stay below min(H,W)/4 = " +
        std::to_string(std::min(h, w) / 4.0));
  }

  const int max_attempts = 10;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Tensor u = draw_field(h, w, spec, rng);
    DisplacementField field{u};
    const DeformationGrid grid = deformation_from(field);
    const DiffeoStats stats = diffeo_stats(jacobian_det(grid));
    if (stats.negative_fraction > 0.0) continue;
    // Bilinear samples of a [0,1] image stay in [0,1]; clamp rounding dust.
    ArrayXd warped = warp(base, grid.phi).values().max(0.0).min(1.0);
    Tensor target = Tensor::constant(base.shape(), std::move(warped));
    SynthPair out;
    out.pair = ImagePair{base, target};
    out.pair.validate();
    out.ground_truth = field;
    return out;
  }
  throw std::runtime_error(
      "synth: failed to draw a diffeomorphic field after " +
      std::to_string(max_attempts) + " attempts; use a smaller max "
      "displacement (or a larger control spacing)");
}

SuiteManifest manifest_from_key_values(const KeyValues& kv) {
  SuiteManifest m;
  const auto type = kv.find("type");
  if (type == kv.end() || type->second != "synth") {
    throw std::invalid_argument(
        "manifest: expected 'type = synth' in a suite manifest");
  }
  for (const auto& [key, value] : kv) {
    if (key == "type") continue;
    std::size_t consumed = 0;
    const auto as_double = [&](const std::string& v) {
      const double d = std::stod(v, &consumed);
      if (consumed != v.size()) {
        throw std::invalid_argument("manifest: key '" + key +
                                    "' expects a number, got '" + v + "'");
      }
      return d;
    };
    if (key == "count") {
      m.count = static_cast<int>(as_double(value));
      if (m.count < 1) {
        throw std::invalid_argument("manifest: count must be >= 1");
      }
    } else if (key == "height") {
      m.spec.height = static_cast<Index>(as_double(value));
    } else if (key == "width") {
      m.spec.width = static_cast<Index>(as_double(value));
    } else if (key == "pattern") {
      m.spec.pattern = value;
    } else if (key == "base_image") {
      m.spec.base_image = value;
    } else if (key == "control_spacing") {
      m.spec.control_spacing = as_double(value);
    } else if (key == "max_displacement") {
      m.spec.max_displacement = as_double(value);
    } else if (key == "smooth_sigma") {
      m.spec.smooth_sigma = as_double(value);
    } else if (key == "seed") {
      m.spec.seed = static_cast<std::uint64_t>(as_double(value));
    } else {
      throw std::invalid_argument("manifest: unknown key '" + key + "'");
    }
  }
  m.spec.validate();
  return m;
}

}  // namespace dipreg
