#include "vn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vn/error.hpp"
#include "vn/rng.hpp"

namespace vn {

namespace {

double relative(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

}  // namespace

GradCheckReport grad_check_report(const std::function<Tensor()>& f, std::vector<Tensor> wrt,
                                  const GradCheckOptions& options) {
  std::vector<bool> restore_flag;
  for (Tensor& t : wrt) {
    restore_flag.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }
  backward(f());
  std::vector<std::vector<double>> analytic;
  for (Tensor& t : wrt) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
    t.zero_grad();
  }

  Rng rng(options.seed);
  GradCheckReport report;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    Tensor& t = wrt[k];
    std::vector<std::size_t> probe(t.numel());
    std::iota(probe.begin(), probe.end(), 0);
    if (options.max_elements > 0 && options.max_elements < probe.size()) {
      // partial Fisher-Yates
      for (std::size_t i = 0; i < options.max_elements; ++i) {
        std::swap(probe[i], probe[i + rng.below(probe.size() - i)]);
      }
      probe.resize(options.max_elements);
    }
    auto values = t.mutable_data();
    auto central = [&](std::size_t idx, double h) {
      const double saved = values[idx];
      values[idx] = saved + h;
      const double up = f().item();
      values[idx] = saved - h;
      const double down = f().item();
      values[idx] = saved;
      return (up - down) / (2.0 * h);
    };
    for (std::size_t idx : probe) {
      const double numeric = central(idx, options.eps);
      ++report.probes;
      if (options.kink_tolerance > 0.0 &&
          relative(numeric, central(idx, options.eps / 2)) > options.kink_tolerance) {
        ++report.skipped;
        continue;
      }
      report.max_error = std::max(report.max_error, relative(analytic[k][idx], numeric));
    }
    t.set_requires_grad(restore_flag[k]);
  }
  return report;
}

double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> wrt,
                  const GradCheckOptions& options) {
  return grad_check_report(f, std::move(wrt), options).max_error;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  Tensor probe = x.detach_copy();
  return grad_check([&] { return f(probe); }, {probe}, GradCheckOptions{eps, 0, 1});
}

}  // namespace vn
