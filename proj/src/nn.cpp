#include "dipreg/nn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace dipreg {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

// Reusable per-thread scratch for the unrolled-convolution buffers. These
// reach tens of MB per layer; allocating them per call dominates the
// runtime with page faults, so they grow once and stay.
double* conv_scratch(int slot, Index size) {
  thread_local std::vector<double> pools[2];
  auto& pool = pools[slot];
  if (pool.size() < static_cast<std::size_t>(size)) pool.resize(size);
  return pool.data();
}

void require_rank3(const char* op, const Tensor& t) {
  if (t.shape().size() != 3) {
    throw std::invalid_argument(std::string(op) + ": expected a {C,H,W} " +
                                "tensor, got shape " +
                                shape_to_string(t.shape()));
  }
}

// Unrolls conv receptive fields into a (Cin*k*k) x (Ho*Wo) matrix; one
// column per output pixel, zeros where the window leaves the image.
// `col` must hold cin*k*k*ho*wo doubles, row-major.
void im2col(const ArrayXd& input, Index cin, Index h, Index w, Index k,
            int stride, int padding, Index ho, Index wo, double* col) {
  for (Index ci = 0; ci < cin; ++ci) {
    const double* plane = input.data() + ci * h * w;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        double* row = col + ((ci * k + ky) * k + kx) * (ho * wo);
        for (Index oy = 0; oy < ho; ++oy) {
          const Index iy = oy * stride - padding + ky;
          double* dst = row + oy * wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, 0.0);
            continue;
          }
          const double* src = plane + iy * w;
          for (Index ox = 0; ox < wo; ++ox) {
            const Index ix = ox * stride - padding + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back into the input layout.
void col2im_add(const double* col, Index cin, Index h, Index w, Index k,
                int stride, int padding, Index ho, Index wo, ArrayXd& out) {
  for (Index ci = 0; ci < cin; ++ci) {
    double* plane = out.data() + ci * h * w;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const double* row = col + ((ci * k + ky) * k + kx) * (ho * wo);
        for (Index oy = 0; oy < ho; ++oy) {
          const Index iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= h) continue;
          double* dst = plane + iy * w;
          const double* src = row + oy * wo;
          for (Index ox = 0; ox < wo; ++ox) {
            const Index ix = ox * stride - padding + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Per-axis source indices and weights for 2x bilinear upsampling.
struct UpsampleAxis {
  std::vector<Index> lo, hi;
  std::vector<double> t;
};

UpsampleAxis upsample_axis(Index in_extent) {
  UpsampleAxis a;
  const Index out_extent = 2 * in_extent;
  a.lo.resize(out_extent);
  a.hi.resize(out_extent);
  a.t.resize(out_extent);
  for (Index i = 0; i < out_extent; ++i) {
    double s = 0.5 * (static_cast<double>(i) + 0.5) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in_extent - 1));
    const Index lo = static_cast<Index>(std::floor(s));
    a.lo[i] = lo;
    a.hi[i] = std::min(lo + 1, in_extent - 1);
    a.t[i] = s - static_cast<double>(lo);
  }
  return a;
}

}  // namespace

Index conv2d_out_extent(Index in, Index kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
  require_rank3("conv2d", input);
  if (weight.shape().size() != 4 || weight.dim(2) != weight.dim(3)) {
    throw std::invalid_argument("conv2d: weight must be {Cout,Cin,k,k}, got " +
                                shape_to_string(weight.shape()));
  }
  const Index cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const Index cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw std::invalid_argument(
        "conv2d: input has " + std::to_string(cin) +
        " channels but weight expects " + std::to_string(weight.dim(1)));
  }
  if (bias.shape() != Shape{cout}) {
    throw std::invalid_argument("conv2d: bias shape " +
                                shape_to_string(bias.shape()) +
                                " does not match Cout=" + std::to_string(cout));
  }
  if (k % 2 == 0) {
    throw std::invalid_argument("conv2d: kernel size must be odd, got " +
                                std::to_string(k));
  }
  if (stride < 1 || padding < 0) {
    throw std::invalid_argument("conv2d: stride must be >=1 and padding >=0");
  }
  const Index ho = conv2d_out_extent(h, k, stride, padding);
  const Index wo = conv2d_out_extent(w, k, stride, padding);
  if (ho < 1 || wo < 1) {
    throw std::invalid_argument("conv2d: kernel " + std::to_string(k) +
                                " does not fit input " + shape_to_string(
                                    input.shape()));
  }

  const Index kk = cin * k * k;
  ArrayXd out(cout * ho * wo);
  {
    double* col = conv_scratch(0, kk * ho * wo);
    im2col(input.values(), cin, h, w, k, stride, padding, ho, wo, col);
    ConstRowMap wmat(weight.values().data(), cout, kk);
    ConstRowMap cmat(col, kk, ho * wo);
    RowMap omat(out.data(), cout, ho * wo);
    omat.noalias() = wmat * cmat;
    for (Index c = 0; c < cout; ++c) omat.row(c).array() += bias.values()[c];
  }

  return make_op(
      "conv2d", {cout, ho, wo}, std::move(out), {input, weight, bias},
      [cin, h, w, cout, kk, k, stride, padding, ho, wo](TensorNode& self) {
        ConstRowMap gout(self.grad.data(), cout, ho * wo);
        const Tensor& input = self.parents[0];
        const Tensor& weight = self.parents[1];
        const Tensor& bias = self.parents[2];
        if (weight.requires_grad()) {
          // The unrolled input is rebuilt rather than kept alive in the
          // node; the parents hold the source values.
          double* col = conv_scratch(0, kk * ho * wo);
          im2col(input.values(), cin, h, w, k, stride, padding, ho, wo, col);
          ConstRowMap cmat(col, kk, ho * wo);
          RowMap gw(weight.node()->ensure_grad().data(), cout, kk);
          gw.noalias() += gout * cmat.transpose();
        }
        if (bias.requires_grad()) {
          ArrayXd& gb = bias.node()->ensure_grad();
          for (Index c = 0; c < cout; ++c) gb[c] += gout.row(c).sum();
        }
        if (input.requires_grad()) {
          ConstRowMap wmat(weight.values().data(), cout, kk);
          double* gcol = conv_scratch(1, kk * ho * wo);
          RowMap gmat(gcol, kk, ho * wo);
          gmat.noalias() = wmat.transpose() * gout;
          col2im_add(gcol, cin, h, w, k, stride, padding, ho, wo,
                     input.node()->ensure_grad());
        }
      });
}

Tensor upsample_bilinear2x(const Tensor& input) {
  require_rank3("upsample_bilinear2x", input);
  const Index c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h < 1 || w < 1) {
    throw std::invalid_argument("upsample_bilinear2x: empty input");
  }
  auto ay = std::make_shared<UpsampleAxis>(upsample_axis(h));
  auto ax = std::make_shared<UpsampleAxis>(upsample_axis(w));
  const Index ho = 2 * h, wo = 2 * w;

  ArrayXd out(c * ho * wo);
  const ArrayXd& in = input.values();
  for (Index ci = 0; ci < c; ++ci) {
    const double* plane = in.data() + ci * h * w;
    double* dst = out.data() + ci * ho * wo;
    for (Index oy = 0; oy < ho; ++oy) {
      const double* r0 = plane + ay->lo[oy] * w;
      const double* r1 = plane + ay->hi[oy] * w;
      const double ty = ay->t[oy];
      for (Index ox = 0; ox < wo; ++ox) {
        const double tx = ax->t[ox];
        const double top = (1.0 - tx) * r0[ax->lo[ox]] + tx * r0[ax->hi[ox]];
        const double bot = (1.0 - tx) * r1[ax->lo[ox]] + tx * r1[ax->hi[ox]];
        dst[oy * wo + ox] = (1.0 - ty) * top + ty * bot;
      }
    }
  }

  return make_op("upsample_bilinear2x", {c, ho, wo}, std::move(out), {input},
                 [ay, ax, c, h, w, ho, wo](TensorNode& self) {
                   ArrayXd& gin = self.parents[0].node()->ensure_grad();
                   for (Index ci = 0; ci < c; ++ci) {
                     double* gplane = gin.data() + ci * h * w;
                     const double* g = self.grad.data() + ci * ho * wo;
                     for (Index oy = 0; oy < ho; ++oy) {
                       const double ty = ay->t[oy];
                       double* g0 = gplane + ay->lo[oy] * w;
                       double* g1 = gplane + ay->hi[oy] * w;
                       for (Index ox = 0; ox < wo; ++ox) {
                         const double tx = ax->t[ox];
                         const double go = g[oy * wo + ox];
                         g0[ax->lo[ox]] += (1.0 - ty) * (1.0 - tx) * go;
                         g0[ax->hi[ox]] += (1.0 - ty) * tx * go;
                         g1[ax->lo[ox]] += ty * (1.0 - tx) * go;
                         g1[ax->hi[ox]] += ty * tx * go;
                       }
                     }
                   }
                 });
}

Tensor leaky_relu(const Tensor& input, double slope) {
  if (slope < 0.0 || slope >= 1.0) {
    throw std::invalid_argument("leaky_relu: slope must lie in [0,1), got " +
                                std::to_string(slope));
  }
  const ArrayXd& x = input.values();
  ArrayXd out = (x > 0.0).select(x, slope * x);
  return make_op("leaky_relu", input.shape(), std::move(out), {input},
                 [slope](TensorNode& self) {
                   const ArrayXd& x = self.parents[0].values();
                   self.parents[0].node()->ensure_grad() +=
                       self.grad * (x > 0.0).select(ArrayXd::Ones(x.size()),
                                                    ArrayXd::Constant(
                                                        x.size(), slope));
                 });
}

Tensor instance_norm(const Tensor& input, double eps) {
  require_rank3("instance_norm", input);
  if (eps <= 0.0) {
    throw std::invalid_argument("instance_norm: eps must be positive");
  }
  const Index c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const Index n = h * w;
  if (n < 2) {
    throw std::invalid_argument(
        "instance_norm: spatial extent must be at least 2 samples");
  }
  auto inv_std = std::make_shared<std::vector<double>>(c);
  ArrayXd out(input.size());
  for (Index ci = 0; ci < c; ++ci) {
    auto x = input.values().segment(ci * n, n);
    const double mu = x.mean();
    const double var = (x - mu).square().mean();
    const double s = 1.0 / std::sqrt(var + eps);
    (*inv_std)[ci] = s;
    out.segment(ci * n, n) = s * (x - mu);
  }
  return make_op(
      "instance_norm", input.shape(), std::move(out), {input},
      [inv_std, c, n](TensorNode& self) {
        ArrayXd& gin = self.parents[0].node()->ensure_grad();
        for (Index ci = 0; ci < c; ++ci) {
          auto g = self.grad.segment(ci * n, n);
          auto y = self.value.segment(ci * n, n);
          const double gm = g.mean();
          const double gym = (g * y).mean();
          gin.segment(ci * n, n) += (*inv_std)[ci] * (g - gm - y * gym);
        }
      });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank3("concat_channels", a);
  require_rank3("concat_channels", b);
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw std::invalid_argument("concat_channels: spatial extents differ, " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
  const Index ca = a.dim(0), cb = b.dim(0);
  ArrayXd out(a.size() + b.size());
  out.head(a.size()) = a.values();
  out.tail(b.size()) = b.values();
  return make_op("concat_channels", {ca + cb, a.dim(1), a.dim(2)},
                 std::move(out), {a, b}, [](TensorNode& self) {
                   const Index na = self.parents[0].size();
                   const Index nb = self.parents[1].size();
                   if (self.parents[0].requires_grad())
                     self.parents[0].node()->ensure_grad() +=
                         self.grad.head(na);
                   if (self.parents[1].requires_grad())
                     self.parents[1].node()->ensure_grad() +=
                         self.grad.tail(nb);
                 });
}

Tensor slice_channels(const Tensor& input, Index first, Index count) {
  require_rank3("slice_channels", input);
  const Index c = input.dim(0), n = input.dim(1) * input.dim(2);
  if (first < 0 || count < 1 || first + count > c) {
    throw std::invalid_argument(
        "slice_channels: range [" + std::to_string(first) + ", " +
        std::to_string(first + count) + ") out of bounds for " +
        std::to_string(c) + " channels");
  }
  ArrayXd out = input.values().segment(first * n, count * n);
  return make_op("slice_channels", {count, input.dim(1), input.dim(2)},
                 std::move(out), {input}, [first, n](TensorNode& self) {
                   self.parents[0].node()->ensure_grad().segment(
                       first * n, self.grad.size()) += self.grad;
                 });
}

}  // namespace dipreg
