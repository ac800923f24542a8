#include "vn/train.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "vn/error.hpp"
#include "vn/ops.hpp"

namespace vn {

void TrainConfig::validate() const {
  if (patch == 0 || batch == 0 || max_steps == 0) {
    fail(ErrorCode::Config, "patch, batch and max_steps must be positive");
  }
  if (!(lr0 > 0.0) || !(poly_power > 0.0) || !(clip_norm > 0.0) || !(adam_eps > 0.0)) {
    fail(ErrorCode::Config, "lr0, poly_power, clip_norm and adam_eps must be positive");
  }
  if (weight_decay < 0.0) fail(ErrorCode::Config, "weight_decay must be nonnegative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail(ErrorCode::Config, "adam betas must lie in [0, 1)");
  }
  if (log_every == 0) fail(ErrorCode::Config, "log_every must be positive");
}

Patch sample_patch(const Image& image, const Image& mask, std::size_t size, Rng& rng) {
  if (image.height < size || image.width < size) {
    fail(ErrorCode::Data, "image " + std::to_string(image.width) + "x" +
                              std::to_string(image.height) + " is smaller than the " +
                              std::to_string(size) + "px patch");
  }
  if (mask.channels != 1 || mask.height != image.height || mask.width != image.width) {
    fail(ErrorCode::Shape, "mask extent does not match its image");
  }
  const std::size_t y0 = rng.below(image.height - size + 1);
  const std::size_t x0 = rng.below(image.width - size + 1);
  Patch p{Image::blank(image.channels, size, size), Image::blank(1, size, size)};
  for (std::size_t c = 0; c < image.channels; ++c) {
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) p.image.at(c, y, x) = image.at(c, y0 + y, x0 + x);
    }
  }
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const std::uint8_t v = mask.at(0, y0 + y, x0 + x);
      if (v > 1) fail(ErrorCode::Data, "mask value " + std::to_string(v) + " outside {0,1}");
      p.mask.at(0, y, x) = v;
    }
  }
  return p;
}

namespace {

// Applies dst(y, x) = src(map(y, x)) to every channel.
template <typename Map>
void remap(Image& img, Map map) {
  Image out = Image::blank(img.channels, img.height, img.width);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        const auto [sy, sx] = map(y, x);
        out.at(c, y, x) = img.at(c, sy, sx);
      }
    }
  }
  img = std::move(out);
}

template <typename Map>
void remap_both(Patch& p, Map map) {
  remap(p.image, map);
  remap(p.mask, map);
}

}  // namespace

void augment(Patch& patch, Rng& rng, const AugmentConfig& config) {
  const std::size_t n = patch.image.height;
  if (patch.image.width != n || patch.mask.height != n || patch.mask.width != n) {
    fail(ErrorCode::Shape, "augment needs square, aligned patch and mask");
  }
  const bool hflip = rng.uniform() < 0.5;
  const bool vflip = rng.uniform() < 0.5;
  const std::size_t turns = rng.below(4);
  const auto span = static_cast<std::uint64_t>(2 * config.max_shift + 1);
  const auto dy = static_cast<std::ptrdiff_t>(rng.below(span)) -
                  static_cast<std::ptrdiff_t>(config.max_shift);
  const auto dx = static_cast<std::ptrdiff_t>(rng.below(span)) -
                  static_cast<std::ptrdiff_t>(config.max_shift);

  using P = std::pair<std::size_t, std::size_t>;
  if (config.hflip && hflip) remap_both(patch, [n](std::size_t y, std::size_t x) { return P{y, n - 1 - x}; });
  if (config.vflip && vflip) remap_both(patch, [n](std::size_t y, std::size_t x) { return P{n - 1 - y, x}; });
  if (config.rotate) {
    // Counter-clockwise quarter turns.
    for (std::size_t k = 0; k < turns; ++k) {
      remap_both(patch, [n](std::size_t y, std::size_t x) { return P{x, n - 1 - y}; });
    }
  }
  if (config.max_shift > 0 && (dy != 0 || dx != 0)) {
    const auto sn = static_cast<std::ptrdiff_t>(n);
    auto wrap = [sn](std::ptrdiff_t v) { return static_cast<std::size_t>(((v % sn) + sn) % sn); };
    remap_both(patch, [&](std::size_t y, std::size_t x) {
      return P{wrap(static_cast<std::ptrdiff_t>(y) - dy), wrap(static_cast<std::ptrdiff_t>(x) - dx)};
    });
  }
}

double normalize_pixel(double value) { return (value / 255.0 - 0.5) / 0.5; }

double denormalize_pixel(double value) { return (value * 0.5 + 0.5) * 255.0; }

Tensor normalize_input(std::span<const Patch> batch) {
  if (batch.empty()) fail(ErrorCode::Argument, "empty batch");
  const Image& first = batch.front().image;
  const Shape s{batch.size(), first.channels, first.height, first.width};
  std::vector<double> values;
  values.reserve(s.numel());
  for (const Patch& p : batch) {
    if (p.image.channels != s.c || p.image.height != s.h || p.image.width != s.w) {
      fail(ErrorCode::Shape, "batch patches differ in extent");
    }
    for (std::uint8_t v : p.image.pixels) values.push_back(normalize_pixel(v));
  }
  return Tensor::from(s, std::move(values));
}

Tensor normalize_input(const Image& image) {
  std::vector<double> values;
  values.reserve(image.pixels.size());
  for (std::uint8_t v : image.pixels) values.push_back(normalize_pixel(v));
  return Tensor::from({1, image.channels, image.height, image.width}, std::move(values));
}

Tensor training_loss(const Tensor& logits, std::span<const std::uint8_t> mask,
                     std::span<const Tensor> conv_weights, double weight_decay) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] > 1) {
      fail(ErrorCode::Data, "mask value " + std::to_string(mask[i]) + " at index " +
                                std::to_string(i) + " outside {0,1}");
    }
  }
  Tensor loss = cross_entropy(logits, mask);
  if (weight_decay > 0.0) {
    for (const Tensor& w : conv_weights) loss = add(loss, scale(sum_squares(w), weight_decay));
  }
  return loss;
}

double poly_lr(std::size_t step, const TrainConfig& config) {
  if (step > config.max_steps) {
    fail(ErrorCode::Argument, "step " + std::to_string(step) + " beyond max_steps " +
                                  std::to_string(config.max_steps));
  }
  const double frac = static_cast<double>(step) / static_cast<double>(config.max_steps);
  return config.lr0 * std::pow(1.0 - frac, config.poly_power);
}

double global_grad_norm(std::span<const Tensor> params) {
  double sq = 0.0;
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_grad_l2(std::span<Tensor> params, double threshold) {
  const double norm = global_grad_norm(params);
  if (norm > threshold) {
    const double factor = threshold / norm;
    for (Tensor& p : params) {
      if (!p.has_grad()) continue;
      for (double& g : p.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

void adam_step(std::span<Tensor> params, AdamState& state, double lr, const TrainConfig& config) {
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) fail(ErrorCode::Argument, "adam state/parameter count mismatch");
  ++state.t;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.numel()) fail(ErrorCode::Argument, "adam state shape mismatch");
    const bool has = p.has_grad();
    const std::span<const double> g = has ? p.grad() : std::span<const double>{};
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double gi = has ? g[i] : 0.0;
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }
  }
}

namespace {

std::string parameter_norms(const Network& net) {
  std::ostringstream out;
  out.precision(6);
  const LayerTable& t = net.layers();
  double total = 0.0;
  for (std::size_t i = 0; i < t.conv_count(); ++i) {
    double sq = 0.0;
    for (double v : t.conv(i).params.weight.data()) sq += v * v;
    total += sq;
    out << ' ' << t.conv(i).name << '=' << std::sqrt(sq);
  }
  return "parameter norm " + std::to_string(std::sqrt(total)) + ";" + out.str();
}

}  // namespace

std::vector<LossRow> train(std::span<const Sample> data, Network& net, const TrainConfig& config,
                           const TrainHooks& hooks) {
  config.validate();
  if (data.empty()) fail(ErrorCode::Data, "training set is empty");
  for (const Sample& s : data) {
    if (s.image.channels != net.spec().in_channels) {
      fail(ErrorCode::Data, s.name + ": image has " + std::to_string(s.image.channels) +
                                " channels, network expects " +
                                std::to_string(net.spec().in_channels));
    }
  }

  Rng rng(config.seed);
  AdamState adam;
  std::vector<Tensor> params = net.parameters();
  const std::vector<Tensor> weights = net.conv_weights();
  std::vector<LossRow> rows;
  rows.reserve(config.max_steps);

  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    std::vector<Patch> batch;
    std::vector<std::uint8_t> labels;
    for (std::size_t b = 0; b < config.batch; ++b) {
      const Sample& s = data[rng.below(data.size())];
      Patch p = sample_patch(s.image, s.mask, config.patch, rng);
      augment(p, rng, config.augment);
      labels.insert(labels.end(), p.mask.pixels.begin(), p.mask.pixels.end());
      batch.push_back(std::move(p));
    }

    net.zero_grad();
    const Tensor logits = net.forward(normalize_input(batch), true);
    const Tensor loss = training_loss(logits, labels, weights, config.weight_decay);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      fail(ErrorCode::Numeric, "non-finite loss at step " + std::to_string(step) + "; " +
                                   parameter_norms(net));
    }
    backward(loss);
    clip_grad_l2(params, config.clip_norm);
    const double lr = poly_lr(step, config);
    adam_step(params, adam, lr, config);

    const LossRow row{step, lr, value};
    rows.push_back(row);
    if (hooks.on_step) hooks.on_step(row);
    if (hooks.on_checkpoint &&
        ((config.checkpoint_every && step % config.checkpoint_every == 0) ||
         step == config.max_steps)) {
      hooks.on_checkpoint(step, net);
    }
  }
  return rows;
}

void write_loss_csv(std::ostream& out, std::span<const LossRow> rows, std::size_t every) {
  out << "step,lr,loss\n";
  char buf[96];
  for (const LossRow& r : rows) {
    const bool last = &r == &rows.back();
    if (r.step != 1 && r.step % every != 0 && !last) continue;
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r.step, r.lr, r.loss);
    out << buf;
  }
}

}  // namespace vn
