#include "vn/tensor.hpp"

#include <algorithm>
#include <unordered_map>

#include "vn/error.hpp"

namespace vn {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::shared_ptr<Node> node;
};

namespace {

thread_local bool g_grad_enabled = true;

std::shared_ptr<TensorImpl> make_impl(Shape shape, std::vector<double> values,
                                      bool requires_grad) {
  if (values.size() != shape.numel()) {
    fail(ErrorCode::Shape, "tensor data length " + std::to_string(values.size()) +
                               " does not match shape " + to_string(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return impl;
}

}  // namespace

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," +
         std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  return Tensor(make_impl(shape, std::vector<double>(shape.numel(), value),
                          requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_impl(shape, std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1, 1, 1, 1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  static const Shape empty{};
  return impl_ ? impl_->shape : empty;
}

std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
  if (numel() != 1) {
    fail(ErrorCode::Shape, "item() on non-scalar tensor " + to_string(shape()));
  }
  return impl_->data[0];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  const Shape& s = impl_->shape;
  return impl_->data[((n * s.c + c) * s.h + h) * s.w + w];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::is_leaf() const { return !impl_->node; }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::accumulate_grad(std::span<const double> g) const {
  if (g.size() != impl_->data.size()) {
    fail(ErrorCode::Shape, "gradient length mismatch for " + to_string(shape()));
  }
  auto& dst = impl_->grad;
  if (dst.empty()) {
    dst.assign(g.begin(), g.end());
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

const std::shared_ptr<Node>& Tensor::node() const { return impl_->node; }

Tensor Tensor::detach_copy() const {
  return Tensor(make_impl(impl_->shape, impl_->data, false));
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::string op,
                           std::vector<Tensor> inputs, BackwardFn backward_fn) {
  auto impl = make_impl(shape, std::move(values), false);
  if (g_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(),
                  [](const Tensor& t) { return t.requires_grad(); })) {
    impl->requires_grad = true;
    impl->node = std::make_shared<Node>(
        Node{std::move(op), std::move(inputs), std::move(backward_fn)});
  }
  return Tensor(std::move(impl));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    fail(ErrorCode::Graph, "backward() requires a scalar loss, got " +
                               to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    fail(ErrorCode::Graph, "loss does not depend on any tensor requiring grad");
  }

  // Iterative DFS post-order; grey marks detect cycles.
  enum class Mark { Grey, Black };
  std::unordered_map<const TensorImpl*, Mark> marks;
  std::vector<TensorImpl*> order;
  struct Frame {
    TensorImpl* impl;
    std::size_t next_input;
  };
  std::vector<Frame> stack{{loss.impl_.get(), 0}};
  marks[loss.impl_.get()] = Mark::Grey;
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& node = top.impl->node;
    if (node && top.next_input < node->inputs.size()) {
      TensorImpl* child = node->inputs[top.next_input++].impl_.get();
      if (!child->requires_grad) continue;
      auto it = marks.find(child);
      if (it == marks.end()) {
        marks[child] = Mark::Grey;
        stack.push_back({child, 0});
      } else if (it->second == Mark::Grey) {
        fail(ErrorCode::Graph, "cycle detected in autograd graph at op '" +
                                   node->op + "'");
      }
      continue;
    }
    marks[top.impl] = Mark::Black;
    order.push_back(top.impl);
    stack.pop_back();
  }

  // Interior gradients are per-sweep scratch; leaves keep accumulating.
  for (TensorImpl* impl : order) {
    if (impl->node) impl->grad.assign(impl->data.size(), 0.0);
  }
  if (loss.impl_->grad.empty()) loss.impl_->grad.assign(1, 0.0);
  loss.impl_->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* impl = *it;
    if (impl->node && impl->node->backward) impl->node->backward(impl->grad);
  }
}

}  // namespace vn
