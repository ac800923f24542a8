#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vn/config.hpp"
#include "vn/image.hpp"

namespace vn {

/// Training images: the dataset at `data`, or `synth_images` generated
/// samples (seeds synth_seed, synth_seed + 1, ...) when `data` is empty.
std::vector<Sample> training_samples(const RunConfig& config);
/// `eval_data`, else `data`, else generated samples disjoint from the
/// training seeds.
std::vector<Sample> evaluation_samples(const RunConfig& config);

struct TrainResult {
  std::string run_dir;
  std::string checkpoint;  // final weights
  double final_loss = 0.0;
};

/// Creates `out_dir` (which must not exist or be empty) holding config.txt,
/// loss.csv, step_<N>.vnck snapshots and model.vnck.
TrainResult cmd_train(const RunConfig& config, const std::string& out_dir, std::ostream& log);

/// Writes <stem>_mask.pgm and <stem>_prob.pgm at the input extent.
void cmd_predict(const std::string& checkpoint, const std::string& image_path,
                 const std::string& out_dir, double threshold, const TileConfig& tiles);

/// Writes <out_dir>/metrics.csv and returns the per-image records.
std::vector<MetricRecord> cmd_evaluate(const std::string& checkpoint, const std::string& dataset,
                                       const std::string& out_dir, double threshold,
                                       const TileConfig& tiles);

/// One row per schedule: reachable offsets, bounding box and density.
void cmd_rf_analyze(const std::vector<std::string>& schedules, std::size_t per_block, std::ostream& out);

void cmd_synth(const std::string& out_dir, std::size_t count, std::size_t size, std::uint64_t seed);

struct AblationVariant {
  std::string name;
  std::string tables;  // result tables the row belongs to
  NetworkSpec spec;
};

/// The comparison grid, built on the width and seed of `base`.
std::vector<AblationVariant> ablation_grid(const NetworkSpec& base);

/// Trains and evaluates every selected grid row under one budget and writes
/// <out_dir>/ablation.csv.
void cmd_ablate(const RunConfig& config, const std::string& out_dir, std::ostream& log);

}  // namespace vn
