#include "vn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vn/error.hpp"
#include "vn/rng.hpp"

namespace vn {

namespace {

struct Painter {
  std::size_t h, w;
  std::vector<double> cover;  // 1 inside a stroke
  Rng& rng;
  std::size_t max_depth;

  bool inside(double y, double x) const {
    return y >= 0.0 && x >= 0.0 && y < static_cast<double>(h) && x < static_cast<double>(w);
  }

  void dab(double y, double x, double radius) {
    const auto y0 = static_cast<std::ptrdiff_t>(std::floor(y - radius));
    const auto x0 = static_cast<std::ptrdiff_t>(std::floor(x - radius));
    const auto y1 = static_cast<std::ptrdiff_t>(std::ceil(y + radius));
    const auto x1 = static_cast<std::ptrdiff_t>(std::ceil(x + radius));
    for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(y0, 0); i <= y1 && i < std::ptrdiff_t(h); ++i) {
      for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(x0, 0); j <= x1 && j < std::ptrdiff_t(w); ++j) {
        const double dy = static_cast<double>(i) + 0.5 - y;
        const double dx = static_cast<double>(j) + 0.5 - x;
        if (dy * dy + dx * dx <= radius * radius) cover[i * w + j] = 1.0;
      }
    }
  }

  void branch(double y, double x, double angle, std::size_t width, std::size_t depth) {
    const double length = 18.0 + 30.0 * rng.uniform();
    const double radius = 0.5 * static_cast<double>(width);
    double bend = (rng.uniform() - 0.5) * 0.03;
    for (double t = 0.0; t < length; t += 0.5) {
      if (!inside(y, x)) return;
      dab(y, x, std::max(radius, 0.5));
      angle += bend;
      bend = 0.95 * bend + (rng.uniform() - 0.5) * 0.01;
      y += 0.5 * std::sin(angle);
      x += 0.5 * std::cos(angle);
    }
    if (depth >= max_depth) return;
    const std::size_t child = width > 1 ? width - 1 : 1;
    const double spread = 0.35 + 0.45 * rng.uniform();
    branch(y, x, angle - spread, child, depth + 1);
    branch(y, x, angle + spread * (0.7 + 0.6 * rng.uniform()), child, depth + 1);
  }
};

}  // namespace

Sample synth_vessel_sample(const SynthConfig& config) {
  if (config.height < 8 || config.width < 8) fail(ErrorCode::Argument, "synthetic image too small");
  Rng rng(config.seed);
  const std::size_t h = config.height;
  const std::size_t w = config.width;
  Painter painter{h, w, std::vector<double>(h * w, 0.0), rng, config.max_depth};

  for (std::size_t r = 0; r < config.roots; ++r) {
    // Enter from a random border point, heading roughly toward the centre.
    const double along = rng.uniform();
    const std::size_t side = rng.below(4);
    double y = 0.0, x = 0.0;
    const double hh = static_cast<double>(h) - 1.0, ww = static_cast<double>(w) - 1.0;
    switch (side) {
      case 0: y = 0.5; x = along * ww; break;
      case 1: y = hh; x = along * ww; break;
      case 2: y = along * hh; x = 0.5; break;
      default: y = along * hh; x = ww; break;
    }
    const double to_centre = std::atan2(0.5 * hh - y, 0.5 * ww - x);
    const double angle = to_centre + (rng.uniform() - 0.5) * 0.8;
    painter.branch(y, x, angle, 4 + rng.below(2), 0);
  }

  // Low-frequency shading: a few random plane waves.
  struct Wave { double fy, fx, phase, amp; };
  std::vector<Wave> waves;
  for (int k = 0; k < 4; ++k) {
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    const double freq = (0.02 + 0.06 * rng.uniform()) * 2.0 * std::numbers::pi;
    waves.push_back({freq * std::sin(theta), freq * std::cos(theta),
                     2.0 * std::numbers::pi * rng.uniform(), 6.0 + 8.0 * rng.uniform()});
  }
  const double base[3] = {150.0, 70.0, 35.0};
  const double vessel_gain[3] = {0.8, 1.0, 0.6};

  Sample s;
  s.name = "synth_" + std::to_string(config.seed);
  s.image = Image::blank(3, h, w);
  s.mask = Image::blank(1, h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double shade = 0.0;
      for (const Wave& wv : waves) {
        shade += wv.amp * std::sin(wv.fy * static_cast<double>(y) + wv.fx * static_cast<double>(x) + wv.phase);
      }
      const double v = painter.cover[y * w + x];
      s.mask.at(0, y, x) = static_cast<std::uint8_t>(v);
      for (std::size_t c = 0; c < 3; ++c) {
        const double noise = config.noise * (2.0 * rng.uniform() - 1.0);
        const double value = base[c] + shade + noise + v * config.contrast * vessel_gain[c];
        s.image.at(c, y, x) = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
      }
    }
  }
  return s;
}

}  // namespace vn
