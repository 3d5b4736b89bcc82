#include "dipreg/warp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dipreg {

void DisplacementField::validate() const {
  if (!u.defined() || u.shape().size() != 3 || u.dim(0) != 2) {
    throw std::invalid_argument(
        "displacement field must be {2,H,W}, got " +
        (u.defined() ? shape_to_string(u.shape()) : std::string("undefined")));
  }
  if (!u.values().allFinite()) {
    throw std::invalid_argument("displacement field contains NaN or Inf");
  }
}

Tensor identity_grid(Index height, Index width) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("identity_grid: dimensions must be positive");
  }
  ArrayXd data(2 * height * width);
  double* gx = data.data();
  double* gy = data.data() + height * width;
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      gx[y * width + x] = static_cast<double>(x);
      gy[y * width + x] = static_cast<double>(y);
    }
  }
  return Tensor::constant({2, height, width}, std::move(data));
}

DeformationGrid deformation_from(const DisplacementField& field) {
  field.validate();
  ArrayXd phi = identity_grid(field.height(), field.width()).values() +
                field.u.values();
  return DeformationGrid{
      Tensor::constant({2, field.height(), field.width()}, std::move(phi))};
}

namespace {

struct Taps {
  Index x0, x1, y0, y1;
  double tx, ty;
  bool inside_x, inside_y;  // false when the coordinate was clamped
};

inline Taps bilinear_taps(double sx, double sy, Index h, Index w) {
  Taps t;
  t.inside_x = sx > 0.0 && sx < static_cast<double>(w - 1);
  t.inside_y = sy > 0.0 && sy < static_cast<double>(h - 1);
  const double cx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  const double cy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  t.x0 = static_cast<Index>(std::floor(cx));
  t.y0 = static_cast<Index>(std::floor(cy));
  t.x1 = std::min(t.x0 + 1, w - 1);
  t.y1 = std::min(t.y0 + 1, h - 1);
  t.tx = cx - static_cast<double>(t.x0);
  t.ty = cy - static_cast<double>(t.y0);
  return t;
}

}  // namespace

Tensor warp(const Tensor& image, const Tensor& grid) {
  if (image.shape().size() != 3) {
    throw std::invalid_argument("warp: image must be {C,H,W}, got " +
                                shape_to_string(image.shape()));
  }
  if (grid.shape().size() != 3 || grid.dim(0) != 2 ||
      grid.dim(1) != image.dim(1) || grid.dim(2) != image.dim(2)) {
    throw std::invalid_argument("warp: grid shape " +
                                shape_to_string(grid.shape()) +
                                " does not match image " +
                                shape_to_string(image.shape()));
  }
  const Index c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const Index n = h * w;

  ArrayXd out(image.size());
  {
    const double* gx = grid.values().data();
    const double* gy = grid.values().data() + n;
    for (Index p = 0; p < n; ++p) {
      const Taps t = bilinear_taps(gx[p], gy[p], h, w);
      for (Index ci = 0; ci < c; ++ci) {
        const double* plane = image.values().data() + ci * n;
        const double top = (1.0 - t.tx) * plane[t.y0 * w + t.x0] +
                           t.tx * plane[t.y0 * w + t.x1];
        const double bot = (1.0 - t.tx) * plane[t.y1 * w + t.x0] +
                           t.tx * plane[t.y1 * w + t.x1];
        out[ci * n + p] = (1.0 - t.ty) * top + t.ty * bot;
      }
    }
  }

  return make_op(
      "warp", image.shape(), std::move(out), {image, grid},
      [c, h, w, n](TensorNode& self) {
        const Tensor& image = self.parents[0];
        const Tensor& grid = self.parents[1];
        const bool need_image = image.requires_grad();
        const bool need_grid = grid.requires_grad();
        const double* gx = grid.values().data();
        const double* gy = grid.values().data() + n;
        double* gimg = need_image ? image.node()->ensure_grad().data()
                                  : nullptr;
        double* ggrid = need_grid ? grid.node()->ensure_grad().data()
                                  : nullptr;
        for (Index p = 0; p < n; ++p) {
          const Taps t = bilinear_taps(gx[p], gy[p], h, w);
          double dgx = 0.0, dgy = 0.0;
          for (Index ci = 0; ci < c; ++ci) {
            const double go = self.grad[ci * n + p];
            const double* plane = image.values().data() + ci * n;
            if (need_image) {
              double* gplane = gimg + ci * n;
              gplane[t.y0 * w + t.x0] += go * (1.0 - t.ty) * (1.0 - t.tx);
              gplane[t.y0 * w + t.x1] += go * (1.0 - t.ty) * t.tx;
              gplane[t.y1 * w + t.x0] += go * t.ty * (1.0 - t.tx);
              gplane[t.y1 * w + t.x1] += go * t.ty * t.tx;
            }
            if (need_grid) {
              if (t.inside_x) {
                dgx += go * ((1.0 - t.ty) *
                                 (plane[t.y0 * w + t.x1] -
                                  plane[t.y0 * w + t.x0]) +
                             t.ty * (plane[t.y1 * w + t.x1] -
                                     plane[t.y1 * w + t.x0]));
              }
              if (t.inside_y) {
                dgy += go * ((1.0 - t.tx) *
                                 (plane[t.y1 * w + t.x0] -
                                  plane[t.y0 * w + t.x0]) +
                             t.tx * (plane[t.y1 * w + t.x1] -
                                     plane[t.y0 * w + t.x1]));
              }
            }
          }
          if (need_grid) {
            ggrid[p] += dgx;
            ggrid[n + p] += dgy;
          }
        }
      });
}

JacobianMap jacobian_det(const DeformationGrid& grid) {
  if (!grid.phi.defined() || grid.phi.shape().size() != 3 ||
      grid.phi.dim(0) != 2) {
    throw std::invalid_argument("jacobian_det: grid must be {2,H,W}");
  }
  const Index h = grid.height(), w = grid.width();
  if (h < 2 || w < 2) {
    throw std::invalid_argument(
        "jacobian_det: needs at least 2x2 pixels, got " +
        std::to_string(h) + "x" + std::to_string(w));
  }
  const Index n = h * w;
  const double* px = grid.phi.values().data();
  const double* py = grid.phi.values().data() + n;

  JacobianMap map;
  map.height = h;
  map.width = w;
  map.det.resize(n);

  // d/dx: central in the interior, one-sided on the first/last column;
  // same for d/dy along rows.
  auto dx = [&](const double* f, Index y, Index x) {
    if (x == 0) return f[y * w + 1] - f[y * w];
    if (x == w - 1) return f[y * w + x] - f[y * w + x - 1];
    return 0.5 * (f[y * w + x + 1] - f[y * w + x - 1]);
  };
  auto dy = [&](const double* f, Index y, Index x) {
    if (y == 0) return f[w + x] - f[x];
    if (y == h - 1) return f[y * w + x] - f[(y - 1) * w + x];
    return 0.5 * (f[(y + 1) * w + x] - f[(y - 1) * w + x]);
  };

  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const double axx = dx(px, y, x), axy = dy(px, y, x);
      const double ayx = dx(py, y, x), ayy = dy(py, y, x);
      map.det[y * w + x] = axx * ayy - axy * ayx;
    }
  }
  return map;
}

DiffeoStats diffeo_stats(const JacobianMap& map) {
  if (map.det.size() == 0) {
    throw std::invalid_argument("diffeo_stats: empty Jacobian map");
  }
  DiffeoStats stats;
  stats.mean = map.det.mean();
  stats.stddev = std::sqrt((map.det - stats.mean).square().mean());
  stats.negative_fraction =
      static_cast<double>((map.det <= 0.0).count()) /
      static_cast<double>(map.det.size());
  return stats;
}

}  // namespace dipreg
