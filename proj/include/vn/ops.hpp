#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vn/tensor.hpp"

namespace vn {

/// Weights (out_c, in_c, kh, kw) plus geometry of a 2-D convolution.
/// Taps sit `dilation` pixels apart; out-of-bounds taps read zero.
struct ConvParams {
  Tensor weight;
  Tensor bias;  // optional, shape (1, out_c, 1, 1)
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
};

Shape conv2d_output_shape(const Shape& x, const ConvParams& p);

Tensor conv2d(const Tensor& x, const ConvParams& p);
Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride);
Tensor adaptive_avg_pool2d(const Tensor& x, std::size_t out_h, std::size_t out_w);
/// Half-pixel-center bilinear interpolation (align_corners = false).
Tensor upsample_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w);
Tensor concat_channels(std::span<const Tensor> xs);
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count);

Tensor relu(const Tensor& x);
Tensor softmax_channel(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);
Tensor sum_squares(const Tensor& x);

/// Mean over all n*h*w pixels of -log softmax(logits)[label]. `labels` holds
/// one class index per pixel in (n, h, w) order.
Tensor cross_entropy(const Tensor& logits, std::span<const std::uint8_t> labels);

}  // namespace vn
