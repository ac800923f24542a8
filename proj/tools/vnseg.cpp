// Command-line front end: train, predict, evaluate, ablate, rf-analyze, synth.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vn/commands.hpp"
#include "vn/error.hpp"
#include "vn/parallel.hpp"

namespace {

struct Flags {
  std::string config;
  std::string checkpoint;
  std::string out;
  std::string image;
  std::string data;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  bool serial = false;
};

vn::RunConfig effective_config(const Flags& f) {
  vn::RunConfig c = f.config.empty() ? vn::RunConfig{} : vn::load_run_config(f.config);
  if (f.seed) {
    c.train.seed = *f.seed;
    c.net.init_seed = *f.seed;
  }
  if (f.threshold) c.threshold = *f.threshold;
  if (!f.data.empty()) c.data = f.data;
  c.validate();
  return c;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) vn::fail(vn::ErrorCode::Argument, std::string("missing required flag ") + flag);
}

int report(std::string_view code, const std::string& message) {
  std::string line = message;
  for (char& ch : line) {
    if (ch == '\n') ch = ' ';
  }
  std::cerr << "ERR:" << code << ":" << line << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retinal vessel segmentation: training, inference and ablations"};
  app.require_subcommand(1);
  Flags f;
  app.add_flag("--serial", f.serial, "single worker thread (bitwise-reproducible)");

  auto* train = app.add_subcommand("train", "train one model into a new run directory");
  train->add_option("--config", f.config, "run configuration file");
  train->add_option("--out", f.out, "run directory to create")->required();
  train->add_option("--seed", f.seed, "overrides the training and init seeds");
  train->add_option("--data", f.data, "dataset root (overrides the config)");

  auto* predict = app.add_subcommand("predict", "write mask and probability map for one image");
  predict->add_option("--checkpoint", f.checkpoint)->required();
  predict->add_option("--image", f.image, "P6 input image")->required();
  predict->add_option("--out", f.out, "output directory");
  predict->add_option("--threshold", f.threshold);
  predict->add_option("--config", f.config, "tile settings");

  auto* evaluate = app.add_subcommand("evaluate", "per-image metrics over a dataset");
  evaluate->add_option("--checkpoint", f.checkpoint)->required();
  evaluate->add_option("--data", f.data, "dataset root (default: eval_data or data from the config)");
  evaluate->add_option("--out", f.out, "directory for metrics.csv");
  evaluate->add_option("--threshold", f.threshold);
  evaluate->add_option("--config", f.config, "tile settings and dataset paths");

  std::vector<std::string> schedules;
  std::size_t per_block = 1;
  auto* rf = app.add_subcommand("rf-analyze", "receptive-field density of dilation-rate schedules");
  rf->add_option("schedules", schedules, "e.g. \"(1,2,1),(2,4,2)\"")->required();
  rf->add_option("--per-block", per_block, "convolutions per listed rate");

  auto* ablate = app.add_subcommand("ablate", "train and score the comparison grid");
  ablate->add_option("--config", f.config, "budget and data");
  ablate->add_option("--out", f.out, "directory to create")->required();
  ablate->add_option("--seed", f.seed);

  std::size_t count = 4, size = 128;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "write a generated vessel dataset");
  synth->add_option("--out", f.out)->required();
  synth->add_option("--count", count);
  synth->add_option("--size", size);
  synth->add_option("--seed", synth_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what());
  }

  try {
    if (f.serial) vn::set_num_threads(1);
    if (*train) {
      const vn::TrainResult r = vn::cmd_train(effective_config(f), f.out, std::cout);
      std::cout << "checkpoint " << r.checkpoint << '\n';
    } else if (*predict) {
      const vn::RunConfig c = effective_config(f);
      vn::cmd_predict(f.checkpoint, f.image, f.out, c.threshold, c.tiles);
    } else if (*evaluate) {
      const vn::RunConfig c = effective_config(f);
      const std::string root = !f.data.empty() ? f.data : !c.eval_data.empty() ? c.eval_data : c.data;
      require(root, "--data");
      const auto records = vn::cmd_evaluate(f.checkpoint, root, f.out, c.threshold, c.tiles);
      vn::write_metrics_csv(std::cout, records);
    } else if (*rf) {
      vn::cmd_rf_analyze(schedules, per_block, std::cout);
    } else if (*ablate) {
      vn::cmd_ablate(effective_config(f), f.out, std::cout);
    } else if (*synth) {
      vn::cmd_synth(f.out, count, size, synth_seed);
    }
  } catch (const vn::Error& e) {
    return report(vn::to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return report("internal", e.what());
  }
  return 0;
}
