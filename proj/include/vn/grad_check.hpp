#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "vn/tensor.hpp"

namespace vn {

struct GradCheckOptions {
  double eps = 1e-5;
  /// Elements probed per tensor; 0 probes every element.
  std::size_t max_elements = 0;
  std::uint64_t seed = 1;
  /// When > 0, a probe whose central difference at eps and eps/2 disagree by
  /// more than this relative amount straddles a non-differentiable point
  /// (relu, max-pool switch) and is skipped rather than scored.
  double kink_tolerance = 0.0;
};

struct GradCheckReport {
  double max_error = 0.0;
  std::size_t probes = 0;
  std::size_t skipped = 0;
};

/// Largest |analytic - central difference| / max(1e-8, |analytic| + |numeric|)
/// over the probed elements of `wrt`. `f` must be a pure scalar function of
/// the current values of `wrt`; the tensors are perturbed in place and
/// restored.
double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> wrt,
                  const GradCheckOptions& options = {});
GradCheckReport grad_check_report(const std::function<Tensor()>& f, std::vector<Tensor> wrt,
                                  const GradCheckOptions& options = {});

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double eps = 1e-5);

}  // namespace vn
