#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "vn/arch.hpp"
#include "vn/metrics.hpp"
#include "vn/train.hpp"

namespace vn {

/// Everything a command needs besides its command-line flags.
struct RunConfig {
  NetworkSpec net;
  TrainConfig train;
  std::string data;       // dataset root; empty selects generated data
  std::string eval_data;  // empty: evaluate on `data`
  double threshold = 0.5;
  TileConfig tiles;
  std::size_t synth_images = 1;
  std::size_t synth_size = 128;
  std::uint64_t synth_seed = 1;
  std::string ablate_variants;  // comma list of grid rows; empty runs all

  void validate() const;
};

/// `key = value` lines, `#` starts a comment. Unknown or repeated keys are
/// rejected with the line number.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::string& path);

/// Canonical form; parse_run_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& config);

}  // namespace vn
