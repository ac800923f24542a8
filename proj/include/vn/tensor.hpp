#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vn {

struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

class Tensor;
struct TensorImpl;

/// Backward closure of one graph node. Receives the gradient of the node's
/// output and accumulates into the inputs that require gradients.
using BackwardFn = std::function<void(std::span<const double> grad_out)>;

struct Node {
  std::string op;
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

/// Dense NCHW tensor of doubles. Copies share storage; operations produce new
/// tensors, so only parameters (through the optimizer) and gradient slots are
/// ever written in place.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const { return shape().numel(); }

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  // The gradient slot is the one mutable part of a produced tensor.
  void accumulate_grad(std::span<const double> g) const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const;

  /// Deep copy of the values only; the result is a fresh leaf.
  Tensor detach_copy() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  /// Builds the output of a differentiable op. The node is attached only when
  /// gradient mode is on and at least one input requires a gradient.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::string op, std::vector<Tensor> inputs,
                            BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<TensorImpl> impl_;

  friend void backward(const Tensor& loss);
};

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls; clear them with zero_grad().
void backward(const Tensor& loss);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace vn
