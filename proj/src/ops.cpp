#include <algorithm>
#include <cmath>
#include <limits>

#include "vn/error.hpp"
#include "vn/ops.hpp"

namespace vn {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::Shape, std::string(op) + ": shape " + to_string(a.shape()) +
                               " vs " + to_string(b.shape()));
  }
}

// Per-axis bilinear sampling table: output index -> two source taps.
struct LerpTap {
  std::size_t lo, hi;
  double frac;
};

std::vector<LerpTap> lerp_table(std::size_t in, std::size_t out) {
  std::vector<LerpTap> table(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    if (in == out) {
      table[i] = {i, i, 0.0};
      continue;
    }
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    table[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return table;
}

}  // namespace

Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride) {
  const Shape xs = x.shape();
  if (kernel == 0 || stride == 0) fail(ErrorCode::Argument, "max_pool2d: zero kernel or stride");
  if (kernel > xs.h || kernel > xs.w) {
    fail(ErrorCode::Argument, "max_pool2d: kernel " + std::to_string(kernel) +
                                  " exceeds input " + to_string(xs));
  }
  const Shape ys{xs.n, xs.c, (xs.h - kernel) / stride + 1, (xs.w - kernel) / stride + 1};
  std::vector<double> out(ys.numel());
  std::vector<std::size_t> argmax(ys.numel());
  const auto in = x.data();
  for (std::size_t p = 0; p < xs.n * xs.c; ++p) {
    const std::size_t base = p * xs.plane();
    for (std::size_t i = 0; i < ys.h; ++i) {
      for (std::size_t j = 0; j < ys.w; ++j) {
        std::size_t best = base + i * stride * xs.w + j * stride;
        for (std::size_t u = 0; u < kernel; ++u) {
          for (std::size_t v = 0; v < kernel; ++v) {
            const std::size_t idx = base + (i * stride + u) * xs.w + j * stride + v;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = p * ys.plane() + i * ys.w + j;
        out[o] = in[best];
        argmax[o] = best;
      }
    }
  }
  return Tensor::make_result(ys, std::move(out), "max_pool2d", {x},
                             [x, argmax = std::move(argmax)](std::span<const double> g) mutable {
                               std::vector<double> dx(x.numel(), 0.0);
                               for (std::size_t o = 0; o < g.size(); ++o) dx[argmax[o]] += g[o];
                               x.accumulate_grad(dx);
                             });
}

Tensor adaptive_avg_pool2d(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  const Shape xs = x.shape();
  if (out_h == 0 || out_w == 0) fail(ErrorCode::Argument, "adaptive_avg_pool2d: zero output size");
  if (out_h > xs.h || out_w > xs.w) {
    fail(ErrorCode::Argument, "adaptive_avg_pool2d: output " + std::to_string(out_h) + "x" +
                                  std::to_string(out_w) + " larger than input " + to_string(xs));
  }
  auto bins = [](std::size_t in, std::size_t out) {
    std::vector<std::pair<std::size_t, std::size_t>> b(out);
    for (std::size_t i = 0; i < out; ++i) b[i] = {i * in / out, (i + 1) * in / out};
    return b;
  };
  const auto rows = bins(xs.h, out_h);
  const auto cols = bins(xs.w, out_w);
  const Shape ys{xs.n, xs.c, out_h, out_w};
  std::vector<double> out(ys.numel());
  const auto in = x.data();
  for (std::size_t p = 0; p < xs.n * xs.c; ++p) {
    const double* plane = in.data() + p * xs.plane();
    for (std::size_t i = 0; i < out_h; ++i) {
      for (std::size_t j = 0; j < out_w; ++j) {
        double acc = 0.0;
        for (std::size_t y = rows[i].first; y < rows[i].second; ++y) {
          for (std::size_t z = cols[j].first; z < cols[j].second; ++z) acc += plane[y * xs.w + z];
        }
        const double count = static_cast<double>((rows[i].second - rows[i].first) *
                                                 (cols[j].second - cols[j].first));
        out[p * ys.plane() + i * out_w + j] = acc / count;
      }
    }
  }
  return Tensor::make_result(
      ys, std::move(out), "adaptive_avg_pool2d", {x},
      [x, rows, cols, xs, ys](std::span<const double> g) mutable {
        std::vector<double> dx(x.numel(), 0.0);
        for (std::size_t p = 0; p < xs.n * xs.c; ++p) {
          double* plane = dx.data() + p * xs.plane();
          for (std::size_t i = 0; i < ys.h; ++i) {
            for (std::size_t j = 0; j < ys.w; ++j) {
              const double count = static_cast<double>((rows[i].second - rows[i].first) *
                                                       (cols[j].second - cols[j].first));
              const double share = g[p * ys.plane() + i * ys.w + j] / count;
              for (std::size_t y = rows[i].first; y < rows[i].second; ++y) {
                for (std::size_t z = cols[j].first; z < cols[j].second; ++z) {
                  plane[y * xs.w + z] += share;
                }
              }
            }
          }
        }
        x.accumulate_grad(dx);
      });
}

Tensor upsample_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  const Shape xs = x.shape();
  if (out_h < xs.h || out_w < xs.w) {
    fail(ErrorCode::Argument, "upsample_bilinear: cannot downscale " + to_string(xs) +
                                  " to " + std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  const Shape ys{xs.n, xs.c, out_h, out_w};
  if (out_h == xs.h && out_w == xs.w) {
    std::vector<double> same(x.data().begin(), x.data().end());
    return Tensor::make_result(ys, std::move(same), "upsample_bilinear", {x},
                               [x](std::span<const double> g) mutable { x.accumulate_grad(g); });
  }
  const auto ty = lerp_table(xs.h, out_h);
  const auto tx = lerp_table(xs.w, out_w);
  std::vector<double> out(ys.numel());
  const auto in = x.data();
  for (std::size_t p = 0; p < xs.n * xs.c; ++p) {
    const double* plane = in.data() + p * xs.plane();
    double* dst = out.data() + p * ys.plane();
    for (std::size_t i = 0; i < out_h; ++i) {
      const LerpTap& a = ty[i];
      const double* r0 = plane + a.lo * xs.w;
      const double* r1 = plane + a.hi * xs.w;
      for (std::size_t j = 0; j < out_w; ++j) {
        const LerpTap& b = tx[j];
        const double top = (1.0 - b.frac) * r0[b.lo] + b.frac * r0[b.hi];
        const double bot = (1.0 - b.frac) * r1[b.lo] + b.frac * r1[b.hi];
        dst[i * out_w + j] = (1.0 - a.frac) * top + a.frac * bot;
      }
    }
  }
  return Tensor::make_result(
      ys, std::move(out), "upsample_bilinear", {x},
      [x, ty, tx, xs, ys](std::span<const double> g) mutable {
        std::vector<double> dx(x.numel(), 0.0);
        for (std::size_t p = 0; p < xs.n * xs.c; ++p) {
          double* plane = dx.data() + p * xs.plane();
          const double* gp = g.data() + p * ys.plane();
          for (std::size_t i = 0; i < ys.h; ++i) {
            const LerpTap& a = ty[i];
            for (std::size_t j = 0; j < ys.w; ++j) {
              const LerpTap& b = tx[j];
              const double v = gp[i * ys.w + j];
              plane[a.lo * xs.w + b.lo] += (1.0 - a.frac) * (1.0 - b.frac) * v;
              plane[a.lo * xs.w + b.hi] += (1.0 - a.frac) * b.frac * v;
              plane[a.hi * xs.w + b.lo] += a.frac * (1.0 - b.frac) * v;
              plane[a.hi * xs.w + b.hi] += a.frac * b.frac * v;
            }
          }
        }
        x.accumulate_grad(dx);
      });
}

Tensor concat_channels(std::span<const Tensor> xs) {
  if (xs.empty()) fail(ErrorCode::Argument, "concat_channels: empty list");
  const Shape first = xs.front().shape();
  std::size_t channels = 0;
  for (const Tensor& t : xs) {
    const Shape& s = t.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      fail(ErrorCode::Shape, "concat_channels: " + to_string(s) + " incompatible with " +
                                 to_string(first));
    }
    channels += s.c;
  }
  const Shape ys{first.n, channels, first.h, first.w};
  const std::size_t plane = first.plane();
  std::vector<double> out(ys.numel());
  std::size_t offset = 0;
  for (const Tensor& t : xs) {
    const std::size_t block = t.shape().c * plane;
    for (std::size_t n = 0; n < first.n; ++n) {
      std::copy_n(t.data().data() + n * block, block,
                  out.data() + n * channels * plane + offset * plane);
    }
    offset += t.shape().c;
  }
  std::vector<Tensor> inputs(xs.begin(), xs.end());
  return Tensor::make_result(ys, std::move(out), "concat_channels", inputs,
                             [inputs, channels, plane](std::span<const double> g) mutable {
                               std::size_t offset = 0;
                               for (Tensor& t : inputs) {
                                 const Shape& s = t.shape();
                                 const std::size_t block = s.c * plane;
                                 if (t.requires_grad()) {
                                   std::vector<double> dx(t.numel());
                                   for (std::size_t n = 0; n < s.n; ++n) {
                                     std::copy_n(g.data() + n * channels * plane + offset * plane,
                                                 block, dx.data() + n * block);
                                   }
                                   t.accumulate_grad(dx);
                                 }
                                 offset += s.c;
                               }
                             });
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
  const Shape xs = x.shape();
  if (count == 0 || begin + count > xs.c) {
    fail(ErrorCode::Shape, "slice_channels: range [" + std::to_string(begin) + "," +
                               std::to_string(begin + count) + ") outside " + to_string(xs));
  }
  const Shape ys{xs.n, count, xs.h, xs.w};
  const std::size_t plane = xs.plane();
  std::vector<double> out(ys.numel());
  for (std::size_t n = 0; n < xs.n; ++n) {
    std::copy_n(x.data().data() + (n * xs.c + begin) * plane, count * plane,
                out.data() + n * count * plane);
  }
  return Tensor::make_result(ys, std::move(out), "slice_channels", {x},
                             [x, begin, count, plane](std::span<const double> g) mutable {
                               const Shape s = x.shape();
                               std::vector<double> dx(x.numel(), 0.0);
                               for (std::size_t n = 0; n < s.n; ++n) {
                                 std::copy_n(g.data() + n * count * plane, count * plane,
                                             dx.data() + (n * s.c + begin) * plane);
                               }
                               x.accumulate_grad(dx);
                             });
}

Tensor relu(const Tensor& x) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  return Tensor::make_result(x.shape(), std::move(out), "relu", {x},
                             [x](std::span<const double> g) mutable {
                               const auto in = x.data();
                               std::vector<double> dx(g.size());
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 dx[i] = in[i] > 0.0 ? g[i] : 0.0;
                               }
                               x.accumulate_grad(dx);
                             });
}

Tensor softmax_channel(const Tensor& x) {
  const Shape xs = x.shape();
  if (xs.c < 2) fail(ErrorCode::Shape, "softmax_channel: needs at least 2 channels");
  const std::size_t plane = xs.plane();
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t n = 0; n < xs.n; ++n) {
    const std::size_t base = n * xs.c * plane;
    for (std::size_t k = 0; k < plane; ++k) {
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < xs.c; ++c) peak = std::max(peak, in[base + c * plane + k]);
      double total = 0.0;
      for (std::size_t c = 0; c < xs.c; ++c) {
        const double e = std::exp(in[base + c * plane + k] - peak);
        out[base + c * plane + k] = e;
        total += e;
      }
      for (std::size_t c = 0; c < xs.c; ++c) out[base + c * plane + k] /= total;
    }
  }
  std::vector<double> saved = out;
  return Tensor::make_result(
      xs, std::move(out), "softmax_channel", {x},
      [x, y = std::move(saved), xs, plane](std::span<const double> g) mutable {
        std::vector<double> dx(g.size());
        for (std::size_t n = 0; n < xs.n; ++n) {
          const std::size_t base = n * xs.c * plane;
          for (std::size_t k = 0; k < plane; ++k) {
            double dot = 0.0;
            for (std::size_t c = 0; c < xs.c; ++c) {
              dot += g[base + c * plane + k] * y[base + c * plane + k];
            }
            for (std::size_t c = 0; c < xs.c; ++c) {
              const std::size_t i = base + c * plane + k;
              dx[i] = y[i] * (g[i] - dot);
            }
          }
        }
        x.accumulate_grad(dx);
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto da = a.data();
  const auto db = b.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  return Tensor::make_result(a.shape(), std::move(out), "add", {a, b},
                             [a, b](std::span<const double> g) mutable {
                               if (a.requires_grad()) a.accumulate_grad(g);
                               if (b.requires_grad()) b.accumulate_grad(g);
                             });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto da = a.data();
  const auto db = b.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  return Tensor::make_result(a.shape(), std::move(out), "mul", {a, b},
                             [a, b](std::span<const double> g) mutable {
                               const auto da = a.data();
                               const auto db = b.data();
                               std::vector<double> d(g.size());
                               if (a.requires_grad()) {
                                 for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * db[i];
                                 a.accumulate_grad(d);
                               }
                               if (b.requires_grad()) {
                                 for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * da[i];
                                 b.accumulate_grad(d);
                               }
                             });
}

Tensor scale(const Tensor& x, double factor) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * factor;
  return Tensor::make_result(x.shape(), std::move(out), "scale", {x},
                             [x, factor](std::span<const double> g) mutable {
                               std::vector<double> dx(g.size());
                               for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * factor;
                               x.accumulate_grad(dx);
                             });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return Tensor::make_result({1, 1, 1, 1}, {acc}, "sum", {x},
                             [x](std::span<const double> g) mutable {
                               x.accumulate_grad(std::vector<double>(x.numel(), g[0]));
                             });
}

Tensor sum_squares(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v * v;
  return Tensor::make_result({1, 1, 1, 1}, {acc}, "sum_squares", {x},
                             [x](std::span<const double> g) mutable {
                               const auto in = x.data();
                               std::vector<double> dx(in.size());
                               for (std::size_t i = 0; i < in.size(); ++i) dx[i] = 2.0 * in[i] * g[0];
                               x.accumulate_grad(dx);
                             });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::uint8_t> labels) {
  const Shape xs = logits.shape();
  const std::size_t plane = xs.plane();
  if (labels.size() != xs.n * plane) {
    fail(ErrorCode::Shape, "cross_entropy: " + std::to_string(labels.size()) +
                               " labels for logits " + to_string(xs));
  }
  if (xs.c < 2) fail(ErrorCode::Shape, "cross_entropy: needs at least 2 classes");
  const auto in = logits.data();
  const double pixels = static_cast<double>(labels.size());
  std::vector<double> prob(in.size());
  double total = 0.0;
  for (std::size_t n = 0; n < xs.n; ++n) {
    const std::size_t base = n * xs.c * plane;
    for (std::size_t k = 0; k < plane; ++k) {
      const std::size_t label = labels[n * plane + k];
      if (label >= xs.c) {
        fail(ErrorCode::Data, "cross_entropy: label " + std::to_string(label) +
                                  " out of range at pixel " + std::to_string(n * plane + k));
      }
      std::size_t top = 0;
      for (std::size_t c = 1; c < xs.c; ++c) {
        if (in[base + c * plane + k] > in[base + top * plane + k]) top = c;
      }
      const double peak = in[base + top * plane + k];
      double rest = 0.0;
      for (std::size_t c = 0; c < xs.c; ++c) {
        const double e = std::exp(in[base + c * plane + k] - peak);
        prob[base + c * plane + k] = e;
        if (c != top) rest += e;
      }
      const double lse = std::log1p(rest);  // log-sum-exp minus peak
      for (std::size_t c = 0; c < xs.c; ++c) prob[base + c * plane + k] /= (1.0 + rest);
      total += lse - (in[base + label * plane + k] - peak);
    }
  }
  std::vector<std::uint8_t> saved(labels.begin(), labels.end());
  return Tensor::make_result(
      {1, 1, 1, 1}, {total / pixels}, "cross_entropy", {logits},
      [logits, prob = std::move(prob), saved = std::move(saved), xs, plane,
       pixels](std::span<const double> g) mutable {
        std::vector<double> dx(prob.size());
        const double s = g[0] / pixels;
        for (std::size_t n = 0; n < xs.n; ++n) {
          const std::size_t base = n * xs.c * plane;
          for (std::size_t k = 0; k < plane; ++k) {
            const std::size_t label = saved[n * plane + k];
            for (std::size_t c = 0; c < xs.c; ++c) {
              const std::size_t i = base + c * plane + k;
              dx[i] = s * (prob[i] - (c == label ? 1.0 : 0.0));
            }
          }
        }
        logits.accumulate_grad(dx);
      });
}

}  // namespace vn
