#include "vn/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "vn/dataset.hpp"
#include "vn/error.hpp"
#include "vn/pnm.hpp"
#include "vn/synth.hpp"

namespace fs = std::filesystem;

namespace vn {

namespace {

// Generated evaluation images start this far past the training seeds.
constexpr std::uint64_t kHeldOutSeedOffset = 1000;

std::vector<Sample> synth_set(const RunConfig& c, std::uint64_t first_seed) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < c.synth_images; ++i) {
    SynthConfig sc;
    sc.height = sc.width = c.synth_size;
    sc.seed = first_seed + i;
    out.push_back(synth_vessel_sample(sc));
  }
  return out;
}

void prepare_out_dir(const std::string& dir) {
  if (dir.empty()) fail(ErrorCode::Argument, "no output directory given");
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) fail(ErrorCode::Io, "'" + dir + "' exists and is not a directory");
    if (!fs::is_empty(dir)) fail(ErrorCode::Io, "refusing to overwrite non-empty directory '" + dir + "'");
  }
  fs::create_directories(dir);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write '" + path.string() + "'");
  return out;
}

// Extent of the coarsest map a spec sees for a given input side.
void check_extent(const NetworkSpec& spec, std::size_t side, const std::string& what) {
  const std::size_t stride = spec.output_stride();
  if (side % stride != 0) {
    fail(ErrorCode::Config, what + " " + std::to_string(side) + " is not divisible by output stride " +
                                std::to_string(stride));
  }
  if (spec.context == ContextKind::PSP) {
    const std::size_t bin = *std::max_element(spec.psp_bins.begin(), spec.psp_bins.end());
    if (side / stride < bin) {
      fail(ErrorCode::Config, what + " " + std::to_string(side) + " gives a " + std::to_string(side / stride) +
                                  "px map at stride " + std::to_string(stride) + ", smaller than PSP bin " +
                                  std::to_string(bin));
    }
  }
}

std::vector<MetricRecord> evaluate_all(Network& net, const std::vector<Sample>& samples, double threshold,
                                       const TileConfig& tiles) {
  std::vector<MetricRecord> records;
  for (const Sample& s : samples) records.push_back(evaluate_image(net, s, threshold, tiles));
  return records;
}

}  // namespace

std::vector<Sample> training_samples(const RunConfig& config) {
  if (!config.data.empty()) return load_dataset(config.data);
  return synth_set(config, config.synth_seed);
}

std::vector<Sample> evaluation_samples(const RunConfig& config) {
  if (!config.eval_data.empty()) return load_dataset(config.eval_data);
  if (!config.data.empty()) return load_dataset(config.data);
  return synth_set(config, config.synth_seed + kHeldOutSeedOffset);
}

TrainResult cmd_train(const RunConfig& config, const std::string& out_dir, std::ostream& log) {
  config.validate();
  check_extent(config.net, config.train.patch, "patch");
  const std::vector<Sample> data = training_samples(config);
  prepare_out_dir(out_dir);
  const fs::path dir(out_dir);
  open_out(dir / "config.txt") << to_text(config);

  Network net = build_network(config.net);
  const TrainConfig& tc = config.train;
  TrainHooks hooks;
  hooks.on_step = [&](const LossRow& r) {
    if (r.step == 1 || r.step % tc.log_every == 0 || r.step == tc.max_steps) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "step %zu lr %.6g loss %.6f\n", r.step, r.lr, r.loss);
      log << buf << std::flush;
    }
  };
  hooks.on_checkpoint = [&](std::size_t step, const Network& n) {
    if (step == tc.max_steps) return;
    char name[32];
    std::snprintf(name, sizeof name, "step_%06zu.vnck", step);
    save_checkpoint((dir / name).string(), n);
  };
  const std::vector<LossRow> rows = train(data, net, tc, hooks);

  TrainResult result;
  result.run_dir = out_dir;
  result.checkpoint = (dir / "model.vnck").string();
  result.final_loss = rows.back().loss;
  save_checkpoint(result.checkpoint, net);
  std::ofstream csv = open_out(dir / "loss.csv");
  write_loss_csv(csv, rows, tc.log_every);
  return result;
}

void cmd_predict(const std::string& checkpoint, const std::string& image_path, const std::string& out_dir,
                 double threshold, const TileConfig& tiles) {
  Network net = load_checkpoint(checkpoint);
  const Image image = load_pnm(image_path);
  if (image.channels != net.spec().in_channels) {
    fail(ErrorCode::Shape, image_path + ": image has " + std::to_string(image.channels) +
                               " channels, model expects " + std::to_string(net.spec().in_channels));
  }
  const std::vector<double> prob = predict_probability(net, image, tiles);
  if (!out_dir.empty()) fs::create_directories(out_dir);
  const std::string stem = fs::path(image_path).stem().string();
  const fs::path dir(out_dir.empty() ? "." : out_dir);
  save_mask(prob, image.height, image.width, (dir / (stem + "_mask.pgm")).string(), threshold);
  save_probability(prob, image.height, image.width, (dir / (stem + "_prob.pgm")).string());
}

std::vector<MetricRecord> cmd_evaluate(const std::string& checkpoint, const std::string& dataset,
                                       const std::string& out_dir, double threshold, const TileConfig& tiles) {
  Network net = load_checkpoint(checkpoint);
  const std::vector<Sample> samples = load_dataset(dataset);
  const std::vector<MetricRecord> records = evaluate_all(net, samples, threshold, tiles);
  if (!out_dir.empty()) fs::create_directories(out_dir);
  std::ofstream csv = open_out(fs::path(out_dir.empty() ? "." : out_dir) / "metrics.csv");
  write_metrics_csv(csv, records);
  return records;
}

void cmd_rf_analyze(const std::vector<std::string>& schedules, std::size_t per_block, std::ostream& out) {
  if (schedules.empty()) fail(ErrorCode::Argument, "no rate schedule given");
  if (per_block == 0) fail(ErrorCode::Argument, "per-block layer count must be positive");
  out << "schedule,layers,reachable,bbox_h,bbox_w,density\n";
  for (const std::string& text : schedules) {
    const auto triples = parse_rate_schedule(text);
    const std::vector<RfLayer> stack = dilated_stack(triples, per_block);
    const ReceptiveFieldMask m = receptive_field_mask(stack);
    char buf[96];
    std::snprintf(buf, sizeof buf, ",%zu,%zu,%zu,%zu,%.10f\n", stack.size(), m.reachable, m.bbox_h, m.bbox_w,
                  m.density);
    out << '"' << text << '"' << buf;
  }
}

void cmd_synth(const std::string& out_dir, std::size_t count, std::size_t size, std::uint64_t seed) {
  if (count == 0 || size == 0) fail(ErrorCode::Argument, "synth needs a positive count and size");
  RunConfig c;
  c.synth_images = count;
  c.synth_size = size;
  prepare_out_dir(out_dir);
  const std::vector<Sample> samples = synth_set(c, seed);
  save_dataset(out_dir, samples);
}

std::vector<AblationVariant> ablation_grid(const NetworkSpec& base) {
  auto row = [&base](std::string name, std::string tables, Variant v, std::size_t stride, bool mg,
                     ContextKind ctx, NormKind norm) {
    NetworkSpec s = base;
    s.variant = v;
    s.dilated_stride = stride;
    s.multigrid = mg;
    s.context = ctx;
    s.norm = norm;
    return AblationVariant{std::move(name), std::move(tables), s};
  };
  using V = Variant;
  using C = ContextKind;
  const NormKind bn = NormKind::Batch;
  return {
      row("backbone", "5;6;8", V::BackboneFCN, 4, false, C::None, bn),
      row("dilated_1_16", "5", V::Dilated, 16, false, C::None, bn),
      row("dilated_1_8", "5", V::Dilated, 8, false, C::None, bn),
      row("dilated_1_4", "5;6", V::Dilated, 4, false, C::None, bn),
      row("dilated_1_4_mg", "5", V::Dilated, 4, true, C::None, bn),
      row("unet", "5;7;8", V::UNetBaseline, 4, false, C::None, bn),
      row("unet_cdm", "5;6;8", V::UNetCDM, 4, true, C::None, bn),
      row("backbone_aspp", "6", V::BackboneFCN, 4, false, C::ASPP, bn),
      row("backbone_psp", "6", V::BackboneFCN, 4, false, C::PSP, bn),
      row("dilated_1_4_aspp", "6", V::Dilated, 4, false, C::ASPP, bn),
      row("dilated_1_4_psp", "6", V::Dilated, 4, false, C::PSP, bn),
      row("unet_cdm_aspp", "6", V::UNetCDM, 4, true, C::ASPP, bn),
      row("unet_cdm_psp", "6;7;8", V::CIEUNet, 4, true, C::PSP, bn),
      row("unet_gn", "7", V::UNetBaseline, 4, false, C::None, NormKind::Group),
      row("unet_in", "7", V::UNetBaseline, 4, false, C::None, NormKind::Instance),
      row("cieunet_in", "7;8", V::CIEUNet, 4, true, C::PSP, NormKind::Instance),
  };
}

void cmd_ablate(const RunConfig& config, const std::string& out_dir, std::ostream& log) {
  config.validate();
  std::vector<AblationVariant> grid = ablation_grid(config.net);
  if (!config.ablate_variants.empty()) {
    std::set<std::string> wanted;
    std::stringstream in(config.ablate_variants);
    std::string item;
    while (std::getline(in, item, ',')) wanted.insert(item);
    for (const std::string& w : wanted) {
      if (std::none_of(grid.begin(), grid.end(), [&](const AblationVariant& v) { return v.name == w; })) {
        fail(ErrorCode::Config, "unknown ablation variant '" + w + "'");
      }
    }
    std::erase_if(grid, [&](const AblationVariant& v) { return !wanted.count(v.name); });
  }
  // Reject impossible rows before spending any training time.
  for (const AblationVariant& v : grid) {
    v.spec.validate();
    check_extent(v.spec, config.train.patch, v.name + ": patch");
    check_extent(v.spec, config.tiles.patch, v.name + ": eval_patch");
  }
  const std::vector<Sample> train_set = training_samples(config);
  const std::vector<Sample> eval_set = evaluation_samples(config);
  prepare_out_dir(out_dir);
  const fs::path dir(out_dir);
  open_out(dir / "config.txt") << to_text(config);

  std::ofstream csv = open_out(dir / "ablation.csv");
  csv << "variant,tables,decoder,dilated_modules,multigrid,context,norm,output_stride,convs,norms,params,"
         "final_loss,acc,se,sp,prec,f1,mcc,iou_fg,miou,auc\n";
  for (const AblationVariant& v : grid) {
    Network net = build_network(v.spec);
    const LayerReport report = layer_report(net);
    const std::vector<LossRow> rows = train(train_set, net, config.train);
    std::ofstream loss = open_out(dir / (v.name + ".loss.csv"));
    write_loss_csv(loss, rows, config.train.log_every);

    const std::vector<MetricRecord> records = evaluate_all(net, eval_set, config.threshold, config.tiles);
    const MetricRecord m = mean_record(records);
    const bool decoder = v.spec.variant == Variant::UNetBaseline || v.spec.variant == Variant::UNetCDM ||
                         v.spec.variant == Variant::CIEUNet;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%s,%s,%d,%zu,%d,%s,%s,%zu,%zu,%zu,%zu,%.10f,%.10f,%.10f,%.10f,%.10f,%.10f,%.10f,%.10f,%.10f,%.10f\n",
                  v.name.c_str(), v.tables.c_str(), decoder ? 1 : 0, v.spec.dilated_module_count(),
                  v.spec.dilated_module_count() && v.spec.multigrid ? 1 : 0, to_string(v.spec.context).c_str(),
                  to_string(v.spec.norm).c_str(), v.spec.output_stride(), report.conv_count, report.norm_count,
                  report.param_count, rows.back().loss, m.acc, m.se, m.sp, m.prec, m.f1, m.mcc, m.iou_fg, m.miou,
                  m.auc);
    csv << buf << std::flush;
    log << v.name << ": loss " << rows.back().loss << " f1 " << m.f1 << '\n' << std::flush;
  }
}

}  // namespace vn
