#pragma once

#include "dipreg/tensor.hpp"

namespace dipreg {

// Coordinate convention used throughout: pixel centers sit at integer
// coordinates, origin at the top-left, x along columns in [0, W-1] and
// y along rows in [0, H-1].

/// Per-pixel displacement in pixel units, shape {2,H,W}: channel 0 is the
/// horizontal (x) component, channel 1 the vertical (y) component.
struct DisplacementField {
  Tensor u;

  Index height() const { return u.dim(1); }
  Index width() const { return u.dim(2); }
  /// Throws unless u is {2,H,W} and finite everywhere.
  void validate() const;
};

/// Absolute sample coordinates phi = identity + u, shape {2,H,W}.
struct DeformationGrid {
  Tensor phi;

  Index height() const { return phi.dim(1); }
  Index width() const { return phi.dim(2); }
};

/// Per-pixel determinant of the deformation Jacobian, row-major H x W.
struct JacobianMap {
  Index height = 0;
  Index width = 0;
  ArrayXd det;
};

struct DiffeoStats {
  double mean = 0.0;
  double stddev = 0.0;          // population
  double negative_fraction = 0.0;  // det <= 0
};

/// Constant {2,H,W} grid with phi(x,y) = (x,y).
Tensor identity_grid(Index height, Index width);

/// phi = identity + u, as plain values (no graph).
DeformationGrid deformation_from(const DisplacementField& field);

/// Samples each channel of a {C,H,W} image at the coordinates of a
/// {2,H,W} grid with bilinear interpolation. Coordinates outside the
/// image are clamped to the border. Differentiable in both arguments;
/// at integer coordinates the gradient uses the right-continuous cell.
Tensor warp(const Tensor& image, const Tensor& grid);

/// Per-pixel 2x2 Jacobian determinant of the grid: central differences in
/// the interior, one-sided on the borders. Needs H, W >= 2.
JacobianMap jacobian_det(const DeformationGrid& grid);

DiffeoStats diffeo_stats(const JacobianMap& map);

}  // namespace dipreg
