#include "vn/norm.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "vn/error.hpp"

namespace vn {

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::Batch: return "BN";
    case NormKind::Group: return "GN";
    case NormKind::Instance: return "IN";
  }
  return "?";
}

NormKind parse_norm_kind(const std::string& text) {
  if (text == "BN" || text == "bn") return NormKind::Batch;
  if (text == "GN" || text == "gn") return NormKind::Group;
  if (text == "IN" || text == "in") return NormKind::Instance;
  fail(ErrorCode::Config, "unknown norm kind '" + text + "' (expected BN, GN or IN)");
}

std::size_t default_groups(std::size_t channels) { return std::gcd(channels, std::size_t{8}); }

NormState NormState::make(NormKind kind, std::size_t channels, std::size_t groups) {
  NormState s;
  s.kind = kind;
  s.gamma = Tensor::full({1, channels, 1, 1}, 1.0, true);
  s.beta = Tensor::zeros({1, channels, 1, 1}, true);
  if (kind == NormKind::Batch) {
    s.running_mean.assign(channels, 0.0);
    s.running_var.assign(channels, 1.0);
  }
  s.groups = kind == NormKind::Group ? (groups ? groups : default_groups(channels)) : 1;
  s.validate();
  return s;
}

void NormState::validate() const {
  if (!(eps > 0.0)) fail(ErrorCode::Config, "norm eps must be positive");
  if (!(momentum > 0.0 && momentum <= 1.0)) fail(ErrorCode::Config, "norm momentum must lie in (0,1]");
  if (kind == NormKind::Group && (groups == 0 || channels() % groups != 0)) {
    fail(ErrorCode::Config, "group norm: " + std::to_string(channels()) +
                                " channels not divisible by " + std::to_string(groups) + " groups");
  }
  for (double v : running_var) {
    if (v < 0.0) fail(ErrorCode::Config, "negative running variance");
  }
}

namespace {

void check_channels(const Tensor& x, const NormState& s, const char* op) {
  if (x.shape().c != s.channels()) {
    fail(ErrorCode::Shape, std::string(op) + ": input has " + std::to_string(x.shape().c) +
                               " channels, norm expects " + std::to_string(s.channels()));
  }
}

// Every (n, c) plane belongs to exactly one statistics bucket; BN, GN and IN
// differ only in that mapping.
struct Buckets {
  std::size_t count;
  std::function<std::size_t(std::size_t n, std::size_t c)> of;
};

struct Stats {
  std::vector<double> mean;
  std::vector<double> var;
};

Stats bucket_stats(const Tensor& x, const Buckets& b) {
  const Shape xs = x.shape();
  const std::size_t plane = xs.plane();
  const auto d = x.data();
  std::vector<double> total(b.count, 0.0), count(b.count, 0.0);
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t c = 0; c < xs.c; ++c) {
      const std::size_t k = b.of(n, c);
      const double* p = d.data() + (n * xs.c + c) * plane;
      total[k] += std::accumulate(p, p + plane, 0.0);
      count[k] += static_cast<double>(plane);
    }
  Stats s{std::vector<double>(b.count), std::vector<double>(b.count, 0.0)};
  for (std::size_t k = 0; k < b.count; ++k) s.mean[k] = total[k] / count[k];
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t c = 0; c < xs.c; ++c) {
      const std::size_t k = b.of(n, c);
      const double* p = d.data() + (n * xs.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double e = p[i] - s.mean[k];
        s.var[k] += e * e;
      }
    }
  for (std::size_t k = 0; k < b.count; ++k) s.var[k] /= count[k];
  return s;
}

// y = gamma * (x - mean) / sqrt(var + eps) + beta with batch-dependent
// statistics, so the input gradient carries the centering terms.
Tensor normalize_buckets(const Tensor& x, const NormState& s, const Buckets& b,
                         const Stats& st, const char* op) {
  const Shape xs = x.shape();
  const std::size_t plane = xs.plane();
  std::vector<double> inv_std(b.count);
  for (std::size_t k = 0; k < b.count; ++k) inv_std[k] = 1.0 / std::sqrt(st.var[k] + s.eps);

  const auto d = x.data();
  const auto gamma = s.gamma.data();
  const auto beta = s.beta.data();
  std::vector<double> xhat(d.size());
  std::vector<double> out(d.size());
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t c = 0; c < xs.c; ++c) {
      const std::size_t k = b.of(n, c);
      const std::size_t base = (n * xs.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        xhat[base + i] = (d[base + i] - st.mean[k]) * inv_std[k];
        out[base + i] = gamma[c] * xhat[base + i] + beta[c];
      }
    }

  return Tensor::make_result(
      xs, std::move(out), op, {x, s.gamma, s.beta},
      [x, g_t = s.gamma, b_t = s.beta, b, xhat = std::move(xhat), inv_std,
       xs, plane](std::span<const double> dy) {
        const auto gamma = g_t.data();
        std::vector<double> dgamma(xs.c, 0.0), dbeta(xs.c, 0.0);
        std::vector<double> m1(b.count, 0.0), m2(b.count, 0.0), cnt(b.count, 0.0);
        for (std::size_t n = 0; n < xs.n; ++n)
          for (std::size_t c = 0; c < xs.c; ++c) {
            const std::size_t k = b.of(n, c);
            const std::size_t base = (n * xs.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const double g = dy[base + i];
              dgamma[c] += g * xhat[base + i];
              dbeta[c] += g;
              m1[k] += g * gamma[c];
              m2[k] += g * gamma[c] * xhat[base + i];
            }
            cnt[k] += static_cast<double>(plane);
          }
        if (x.requires_grad()) {
          for (std::size_t k = 0; k < b.count; ++k) {
            m1[k] /= cnt[k];
            m2[k] /= cnt[k];
          }
          std::vector<double> dx(dy.size());
          for (std::size_t n = 0; n < xs.n; ++n)
            for (std::size_t c = 0; c < xs.c; ++c) {
              const std::size_t k = b.of(n, c);
              const std::size_t base = (n * xs.c + c) * plane;
              for (std::size_t i = 0; i < plane; ++i) {
                const double dxhat = dy[base + i] * gamma[c];
                dx[base + i] = (dxhat - m1[k] - xhat[base + i] * m2[k]) * inv_std[k];
              }
            }
          x.accumulate_grad(dx);
        }
        if (g_t.requires_grad()) g_t.accumulate_grad(dgamma);
        if (b_t.requires_grad()) b_t.accumulate_grad(dbeta);
      });
}

Tensor batch_norm_eval(const Tensor& x, const NormState& s) {
  const Shape xs = x.shape();
  const std::size_t plane = xs.plane();
  std::vector<double> inv_std(xs.c);
  for (std::size_t c = 0; c < xs.c; ++c) inv_std[c] = 1.0 / std::sqrt(s.running_var[c] + s.eps);
  const auto d = x.data();
  const auto gamma = s.gamma.data();
  const auto beta = s.beta.data();
  std::vector<double> xhat(d.size()), out(d.size());
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t c = 0; c < xs.c; ++c) {
      const std::size_t base = (n * xs.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        xhat[base + i] = (d[base + i] - s.running_mean[c]) * inv_std[c];
        out[base + i] = gamma[c] * xhat[base + i] + beta[c];
      }
    }
  return Tensor::make_result(
      xs, std::move(out), "batch_norm_eval", {x, s.gamma, s.beta},
      [x, g_t = s.gamma, b_t = s.beta, xhat = std::move(xhat), inv_std, xs,
       plane](std::span<const double> dy) {
        const auto gamma = g_t.data();
        std::vector<double> dx(dy.size()), dgamma(xs.c, 0.0), dbeta(xs.c, 0.0);
        for (std::size_t n = 0; n < xs.n; ++n)
          for (std::size_t c = 0; c < xs.c; ++c) {
            const std::size_t base = (n * xs.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              dx[base + i] = dy[base + i] * gamma[c] * inv_std[c];
              dgamma[c] += dy[base + i] * xhat[base + i];
              dbeta[c] += dy[base + i];
            }
          }
        if (x.requires_grad()) x.accumulate_grad(dx);
        if (g_t.requires_grad()) g_t.accumulate_grad(dgamma);
        if (b_t.requires_grad()) b_t.accumulate_grad(dbeta);
      });
}

}  // namespace

Tensor batch_norm(const Tensor& x, NormState& s, bool training) {
  check_channels(x, s, "batch_norm");
  if (s.running_mean.size() != s.channels() || s.running_var.size() != s.channels()) {
    fail(ErrorCode::Config, "batch_norm: state has no running statistics");
  }
  if (!training) return batch_norm_eval(x, s);
  const Shape xs = x.shape();
  if (xs.n * xs.plane() < 2) {
    fail(ErrorCode::Shape, "batch_norm: training needs more than one value per channel, got " +
                               to_string(xs));
  }
  const Buckets b{xs.c, [](std::size_t, std::size_t c) { return c; }};
  const Stats st = bucket_stats(x, b);
  for (std::size_t c = 0; c < xs.c; ++c) {
    s.running_mean[c] = (1.0 - s.momentum) * s.running_mean[c] + s.momentum * st.mean[c];
    s.running_var[c] = (1.0 - s.momentum) * s.running_var[c] + s.momentum * st.var[c];
  }
  return normalize_buckets(x, s, b, st, "batch_norm");
}

Tensor group_norm(const Tensor& x, const NormState& s) {
  check_channels(x, s, "group_norm");
  const Shape xs = x.shape();
  if (s.groups == 0 || xs.c % s.groups != 0) {
    fail(ErrorCode::Shape, "group_norm: " + std::to_string(xs.c) + " channels not divisible by " +
                               std::to_string(s.groups) + " groups");
  }
  const std::size_t groups = s.groups;
  const std::size_t per_group = xs.c / groups;
  const Buckets b{xs.n * groups, [groups, per_group](std::size_t n, std::size_t c) {
                    return n * groups + c / per_group;
                  }};
  return normalize_buckets(x, s, b, bucket_stats(x, b), "group_norm");
}

Tensor instance_norm(const Tensor& x, const NormState& s) {
  check_channels(x, s, "instance_norm");
  const Shape xs = x.shape();
  if (xs.plane() < 2) {
    fail(ErrorCode::Shape, "instance_norm: needs at least 2 spatial positions, got " + to_string(xs));
  }
  const std::size_t channels = xs.c;
  const Buckets b{xs.n * channels,
                  [channels](std::size_t n, std::size_t c) { return n * channels + c; }};
  return normalize_buckets(x, s, b, bucket_stats(x, b), "instance_norm");
}

Tensor normalize(const Tensor& x, NormState& s, bool training) {
  switch (s.kind) {
    case NormKind::Batch: return batch_norm(x, s, training);
    case NormKind::Group: return group_norm(x, s);
    case NormKind::Instance: return instance_norm(x, s);
  }
  fail(ErrorCode::Config, "unknown norm kind");
}

}  // namespace vn
