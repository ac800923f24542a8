#pragma once

#include <cstddef>
#include <cstdint>

#include "vn/image.hpp"

namespace vn {

/// Procedural stand-in for a fundus photograph: a branching tree of bright
/// curvilinear strokes (widths 1 to 5 px, thinning at each split) over a
/// smoothly varying, noisy reddish background.
struct SynthConfig {
  std::size_t height = 128;
  std::size_t width = 128;
  std::uint64_t seed = 0;
  std::size_t roots = 3;
  std::size_t max_depth = 4;
  double contrast = 60.0;
  double noise = 6.0;
};

Sample synth_vessel_sample(const SynthConfig& config);

}  // namespace vn
