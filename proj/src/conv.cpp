#include <Eigen/Core>
#include <algorithm>
#include <cstdint>

#include "vn/error.hpp"
#include "vn/ops.hpp"
#include "vn/parallel.hpp"

namespace vn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

struct Geometry {
  std::size_t channels, in_h, in_w;
  std::size_t kh, kw;
  std::size_t out_h, out_w;
  std::ptrdiff_t stride, padding, dilation;

  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return out_h * out_w; }
  bool pointwise() const {
    return kh == 1 && kw == 1 && stride == 1 && padding == 0;
  }
};

// First and one-past-last output index whose tap `offset` (already including
// -padding + u*dilation) lands inside [0, extent).
std::pair<std::ptrdiff_t, std::ptrdiff_t> valid_range(std::ptrdiff_t offset,
                                                      std::ptrdiff_t stride,
                                                      std::ptrdiff_t extent,
                                                      std::ptrdiff_t out) {
  std::ptrdiff_t lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  std::ptrdiff_t hi = extent - 1 - offset < 0 ? 0 : (extent - 1 - offset) / stride + 1;
  return {std::min(lo, out), std::min(hi, out)};
}

void im2col(const double* x, const Geometry& g, double* col) {
  const auto oh = static_cast<std::ptrdiff_t>(g.out_h);
  const auto ow = static_cast<std::ptrdiff_t>(g.out_w);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* plane = x + c * g.in_h * g.in_w;
    for (std::size_t u = 0; u < g.kh; ++u) {
      const std::ptrdiff_t oy = -g.padding + static_cast<std::ptrdiff_t>(u) * g.dilation;
      const auto [i0, i1] = valid_range(oy, g.stride, g.in_h, oh);
      for (std::size_t v = 0; v < g.kw; ++v) {
        const std::ptrdiff_t ox = -g.padding + static_cast<std::ptrdiff_t>(v) * g.dilation;
        const auto [j0, j1] = valid_range(ox, g.stride, g.in_w, ow);
        double* row = col + ((c * g.kh + u) * g.kw + v) * g.cols();
        std::fill(row, row + g.cols(), 0.0);
        for (std::ptrdiff_t i = i0; i < i1; ++i) {
          const double* src = plane + (i * g.stride + oy) * g.in_w;
          double* dst = row + i * ow;
          for (std::ptrdiff_t j = j0; j < j1; ++j) dst[j] = src[j * g.stride + ox];
        }
      }
    }
  }
}

void col2im(const double* col, const Geometry& g, double* dx) {
  const auto oh = static_cast<std::ptrdiff_t>(g.out_h);
  const auto ow = static_cast<std::ptrdiff_t>(g.out_w);
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* plane = dx + c * g.in_h * g.in_w;
    for (std::size_t u = 0; u < g.kh; ++u) {
      const std::ptrdiff_t oy = -g.padding + static_cast<std::ptrdiff_t>(u) * g.dilation;
      const auto [i0, i1] = valid_range(oy, g.stride, g.in_h, oh);
      for (std::size_t v = 0; v < g.kw; ++v) {
        const std::ptrdiff_t ox = -g.padding + static_cast<std::ptrdiff_t>(v) * g.dilation;
        const auto [j0, j1] = valid_range(ox, g.stride, g.in_w, ow);
        const double* row = col + ((c * g.kh + u) * g.kw + v) * g.cols();
        for (std::ptrdiff_t i = i0; i < i1; ++i) {
          double* dst = plane + (i * g.stride + oy) * g.in_w;
          const double* src = row + i * ow;
          for (std::ptrdiff_t j = j0; j < j1; ++j) dst[j * g.stride + ox] += src[j];
        }
      }
    }
  }
}

}  // namespace

Shape conv2d_output_shape(const Shape& x, const ConvParams& p) {
  if (!p.weight.defined()) fail(ErrorCode::Argument, "conv2d: weight not set");
  const Shape& w = p.weight.shape();
  if (p.dilation < 1) fail(ErrorCode::Argument, "conv2d: dilation must be >= 1");
  if (p.stride < 1) fail(ErrorCode::Argument, "conv2d: stride must be >= 1");
  if (w.h % 2 == 0 || w.w % 2 == 0) {
    fail(ErrorCode::Argument, "conv2d: kernel extents must be odd, got " + to_string(w));
  }
  if (x.c != w.c) {
    fail(ErrorCode::Shape, "conv2d: input has " + std::to_string(x.c) +
                               " channels, weight expects " + std::to_string(w.c));
  }
  if (p.bias.defined() && p.bias.numel() != w.n) {
    fail(ErrorCode::Shape, "conv2d: bias length does not match out channels");
  }
  const std::size_t ext_h = (w.h - 1) * p.dilation + 1;
  const std::size_t ext_w = (w.w - 1) * p.dilation + 1;
  const std::size_t pad_h = x.h + 2 * p.padding;
  const std::size_t pad_w = x.w + 2 * p.padding;
  if (ext_h > pad_h || ext_w > pad_w) {
    fail(ErrorCode::Shape, "conv2d: effective kernel " + std::to_string(ext_h) + "x" +
                               std::to_string(ext_w) + " exceeds padded input " +
                               std::to_string(pad_h) + "x" + std::to_string(pad_w));
  }
  return {x.n, w.n, (pad_h - ext_h) / p.stride + 1, (pad_w - ext_w) / p.stride + 1};
}

Tensor conv2d(const Tensor& x, const ConvParams& p) {
  const Shape xs = x.shape();
  const Shape ys = conv2d_output_shape(xs, p);
  const Shape ws = p.weight.shape();
  const Geometry g{xs.c,
                   xs.h,
                   xs.w,
                   ws.h,
                   ws.w,
                   ys.h,
                   ys.w,
                   static_cast<std::ptrdiff_t>(p.stride),
                   static_cast<std::ptrdiff_t>(p.padding),
                   static_cast<std::ptrdiff_t>(p.dilation)};
  const std::size_t out_c = ws.n;
  const std::size_t in_plane = xs.c * xs.h * xs.w;
  const std::size_t out_plane = out_c * g.cols();

  std::vector<double> out(ys.numel());
  const double* xd = x.data().data();
  const double* wd = p.weight.data().data();
  const double* bd = p.bias.defined() ? p.bias.data().data() : nullptr;

  parallel_for(xs.n, [&](std::size_t n) {
    std::vector<double> col;
    const double* cols = xd + n * in_plane;
    if (!g.pointwise()) {
      col.resize(g.rows() * g.cols());
      im2col(cols, g, col.data());
      cols = col.data();
    }
    MutMap y(out.data() + n * out_plane, out_c, g.cols());
    y.noalias() = ConstMap(wd, out_c, g.rows()) * ConstMap(cols, g.rows(), g.cols());
    if (bd) {
      for (std::size_t o = 0; o < out_c; ++o) y.row(o).array() += bd[o];
    }
  });

  Tensor weight = p.weight;
  Tensor bias = p.bias;
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor::make_result(
      ys, std::move(out), "conv2d", std::move(inputs),
      [x, weight, bias, g, out_c, in_plane, out_plane](std::span<const double> gy) mutable {
        const std::size_t batch = x.shape().n;
        const std::size_t wsize = weight.numel();
        const bool need_dx = x.requires_grad();
        const bool need_dw = weight.requires_grad();
        const double* xd = x.data().data();
        const double* wd = weight.data().data();

        std::vector<double> dx(need_dx ? x.numel() : 0);
        // One weight-gradient slab per sample, reduced in sample order below so
        // the sum is identical for any worker count.
        const bool parallel = num_threads() > 1 && batch > 1;
        const std::size_t slabs = need_dw ? (parallel ? batch : 1) : 0;
        std::vector<double> dw_parts(slabs * wsize);
        std::vector<double> dw_total(need_dw ? wsize : 0, 0.0);

        auto per_sample = [&](std::size_t n, double* dw_slab) {
          ConstMap gmat(gy.data() + n * out_plane, out_c, g.cols());
          std::vector<double> col;
          const double* cols = xd + n * in_plane;
          if (need_dw) {
            if (!g.pointwise()) {
              col.resize(g.rows() * g.cols());
              im2col(cols, g, col.data());
              cols = col.data();
            }
            MutMap(dw_slab, out_c, g.rows()).noalias() =
                gmat * ConstMap(cols, g.rows(), g.cols()).transpose();
          }
          if (need_dx) {
            double* dxn = dx.data() + n * in_plane;
            if (g.pointwise()) {
              MutMap(dxn, g.rows(), g.cols()).noalias() =
                  ConstMap(wd, out_c, g.rows()).transpose() * gmat;
            } else {
              std::vector<double> dcol(g.rows() * g.cols());
              MutMap(dcol.data(), g.rows(), g.cols()).noalias() =
                  ConstMap(wd, out_c, g.rows()).transpose() * gmat;
              col2im(dcol.data(), g, dxn);
            }
          }
        };

        if (!parallel) {
          for (std::size_t n = 0; n < batch; ++n) {
            per_sample(n, dw_parts.data());
            for (std::size_t i = 0; i < dw_parts.size(); ++i) dw_total[i] += dw_parts[i];
          }
        } else {
          parallel_for(batch, [&](std::size_t n) {
            per_sample(n, need_dw ? dw_parts.data() + n * wsize : nullptr);
          });
          for (std::size_t n = 0; n < slabs; ++n) {
            const double* part = dw_parts.data() + n * wsize;
            for (std::size_t i = 0; i < wsize; ++i) dw_total[i] += part[i];
          }
        }

        if (need_dx) x.accumulate_grad(dx);
        if (need_dw) weight.accumulate_grad(dw_total);
        if (bias.defined() && bias.requires_grad()) {
          std::vector<double> db(out_c, 0.0);
          for (std::size_t n = 0; n < batch; ++n) {
            for (std::size_t o = 0; o < out_c; ++o) {
              const double* row = gy.data() + n * out_plane + o * g.cols();
              double acc = 0.0;
              for (std::size_t k = 0; k < g.cols(); ++k) acc += row[k];
              db[o] += acc;
            }
          }
          bias.accumulate_grad(db);
        }
      });
}

}  // namespace vn
