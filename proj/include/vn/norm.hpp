#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vn/tensor.hpp"

namespace vn {

enum class NormKind { Batch, Group, Instance };

std::string to_string(NormKind kind);
NormKind parse_norm_kind(const std::string& text);

/// Learnable per-channel affine plus the running statistics BN keeps for
/// evaluation. All variances are biased (population) variances.
struct NormState {
  NormKind kind = NormKind::Batch;
  Tensor gamma;  // (1, c, 1, 1)
  Tensor beta;   // (1, c, 1, 1)
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;
  std::size_t groups = 1;

  static NormState make(NormKind kind, std::size_t channels, std::size_t groups = 0);

  std::size_t channels() const { return gamma.numel(); }
  void validate() const;
};

/// Default GN group count: gcd(channels, 8).
std::size_t default_groups(std::size_t channels);

/// Training normalizes over (n, h, w) per channel and folds the batch
/// statistics into the running ones; evaluation uses the running statistics.
Tensor batch_norm(const Tensor& x, NormState& s, bool training);
Tensor group_norm(const Tensor& x, const NormState& s);
/// Per (sample, channel) over (h, w); identical in training and evaluation.
Tensor instance_norm(const Tensor& x, const NormState& s);

/// Dispatch on s.kind.
Tensor normalize(const Tensor& x, NormState& s, bool training);

}  // namespace vn
