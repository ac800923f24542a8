#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "vn/arch.hpp"
#include "vn/image.hpp"
#include "vn/rng.hpp"
#include "vn/tensor.hpp"

namespace vn {

struct AugmentConfig {
  bool hflip = true;
  bool vflip = true;
  bool rotate = true;
  std::size_t max_shift = 8;  // circular shift drawn from [-max_shift, max_shift]
};

struct TrainConfig {
  std::size_t patch = 64;
  std::size_t batch = 64;
  std::size_t max_steps = 30000;
  double lr0 = 1e-3;
  double poly_power = 0.9;
  double weight_decay = 1e-5;
  double clip_norm = 0.5;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t log_every = 10;
  std::size_t checkpoint_every = 0;  // 0: only the final checkpoint
  AugmentConfig augment;

  void validate() const;
};

struct Patch {
  Image image;
  Image mask;
};

/// Uniform top-left corner (row drawn first, then column); both draws happen
/// even when the range is a single position.
Patch sample_patch(const Image& image, const Image& mask, std::size_t size, Rng& rng);

/// Draws, in order: hflip, vflip (uniform < 0.5 each), quarter turns
/// below(4), row shift, column shift. Every draw is taken regardless of
/// which transforms are enabled, so toggling one leaves the stream intact.
void augment(Patch& patch, Rng& rng, const AugmentConfig& config = {});

double normalize_pixel(double value);
double denormalize_pixel(double value);

/// Stacks patches into an (n, c, size, size) tensor scaled to [-1, 1].
Tensor normalize_input(std::span<const Patch> batch);
Tensor normalize_input(const Image& image);

/// Mean softmax cross-entropy plus weight_decay * sum of squared conv weights.
Tensor training_loss(const Tensor& logits, std::span<const std::uint8_t> mask,
                     std::span<const Tensor> conv_weights, double weight_decay);

double poly_lr(std::size_t step, const TrainConfig& config);

/// Rescales all gradients in place when their global L2 norm exceeds
/// `threshold`. Returns the norm before clipping.
double clip_grad_l2(std::span<Tensor> params, double threshold);
double global_grad_norm(std::span<const Tensor> params);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update; parameters without a gradient count as
/// having a zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state, double lr, const TrainConfig& config);

struct LossRow {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainHooks {
  std::function<void(const LossRow&)> on_step;
  std::function<void(std::size_t step, const Network& net)> on_checkpoint;
};

/// Runs steps 1..max_steps. Each batch draws its images uniformly with
/// replacement. Returns one row per step.
std::vector<LossRow> train(std::span<const Sample> data, Network& net, const TrainConfig& config,
                           const TrainHooks& hooks = {});

/// Header "step,lr,loss"; rows for step 1, every `every`-th step and the last.
void write_loss_csv(std::ostream& out, std::span<const LossRow> rows, std::size_t every);

}  // namespace vn
