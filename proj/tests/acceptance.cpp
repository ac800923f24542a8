// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
//
//   acceptance --cli path/to/vnseg [--only 1,2,7] [--work DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "vn/arch.hpp"
#include "vn/commands.hpp"
#include "vn/error.hpp"
#include "vn/grad_check.hpp"
#include "vn/metrics.hpp"
#include "vn/norm.hpp"
#include "vn/parallel.hpp"
#include "vn/synth.hpp"
#include "vn/train.hpp"

using namespace vn;
namespace fs = std::filesystem;

namespace {

// Collects named sub-checks; the criterion passes only if all of them do.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& text) { notes_.push_back(text); }
  bool ok() const { return failures_.empty(); }
  std::string summary() const {
    std::string out;
    for (const auto& f : failures_) out += (out.empty() ? "" : "; ") + ("failed: " + f);
    for (const auto& n : notes_) out += (out.empty() ? "" : "; ") + n;
    return out;
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Tensor nudged(Shape s, Rng& rng, double gap = 0.05) {
  Tensor t = oracle::random_tensor(s, rng);
  for (double& v : t.mutable_data()) {
    if (std::abs(v) < gap) v = v < 0 ? v - gap : v + gap;
  }
  return t;
}

// Random linear read-out so gradients differ per element.
Tensor project(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, oracle::random_tensor(y.shape(), rng)));
}

ConvParams random_conv(std::size_t out_c, std::size_t in_c, std::size_t k, Rng& rng, std::size_t stride,
                       std::size_t pad, std::size_t rate, bool bias) {
  ConvParams p;
  p.weight = oracle::random_tensor({out_c, in_c, k, k}, rng);
  if (bias) p.bias = oracle::random_tensor({1, out_c, 1, 1}, rng);
  p.stride = stride;
  p.padding = pad;
  p.dilation = rate;
  return p;
}

// ---------------------------------------------------------------------------

void gradient_correctness(Checks& c) {
  Rng rng(101);
  double worst = 0.0;
  auto layer = [&](const std::string& name, double err) {
    worst = std::max(worst, err);
    c.expect(err < 1e-5, name + " rel err " + sci(err));
  };

  for (std::size_t rate : {1, 2, 4, 8}) {
    Tensor x = oracle::random_tensor({2, 3, 11, 11}, rng);
    ConvParams p = random_conv(4, 3, 3, rng, 1, rate, rate, true);
    layer("conv r=" + std::to_string(rate),
          grad_check([&] { return project(conv2d(x, p), rate); }, {x, p.weight, p.bias}));
  }
  Tensor x = nudged({2, 3, 8, 8}, rng);
  layer("max pool", grad_check([&] { return project(max_pool2d(x, 2, 2), 1); }, {x}));
  layer("adaptive avg pool", grad_check([&] { return project(adaptive_avg_pool2d(x, 3, 5), 2); }, {x}));
  layer("bilinear upsample", grad_check([&] { return project(upsample_bilinear(x, 13, 16), 3); }, {x}));
  Tensor x2 = oracle::random_tensor({2, 2, 8, 8}, rng);
  layer("concat", grad_check([&] { return project(concat_channels(std::vector<Tensor>{x, x2}), 4); }, {x, x2}));
  layer("relu", grad_check([&] { return project(relu(x), 5); }, {x}));
  for (NormKind kind : {NormKind::Batch, NormKind::Group, NormKind::Instance}) {
    NormState s = NormState::make(kind, 4, 2);
    for (double& g : s.gamma.mutable_data()) g = 0.5 + rng.uniform();
    for (double& b : s.beta.mutable_data()) b = rng.uniform() - 0.5;
    Tensor xn = oracle::random_tensor({2, 4, 5, 5}, rng);
    layer(to_string(kind), grad_check([&] { return project(normalize(xn, s, true), 6); }, {xn, s.gamma, s.beta}));
  }
  Tensor logits = oracle::random_tensor({2, 2, 6, 6}, rng, -2, 2);
  std::vector<std::uint8_t> labels(2 * 36);
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng.below(2));
  layer("softmax", grad_check([&] { return project(softmax_channel(logits), 7); }, {logits}));
  layer("softmax-CE", grad_check([&] { return cross_entropy(logits, labels); }, {logits}));

  // Whole network: batch 3 at 24x24 keeps the 6x6 pyramid bin of the 1/4
  // map and gives BN three values per channel on the 1x1 bin.
  NetworkSpec spec = NetworkSpec::make(Variant::CIEUNet);
  spec.base_width = 4;
  spec.init_seed = 5;
  Network net = build_network(spec);
  Tensor input = oracle::random_tensor({3, 3, 24, 24}, rng, -1.0, 1.0, true);
  std::vector<std::uint8_t> mask(3 * 24 * 24);
  for (auto& l : mask) l = static_cast<std::uint8_t>(rng.below(2));
  std::vector<Tensor> wrt = net.parameters();
  wrt.push_back(input);
  GradCheckOptions opts;
  opts.max_elements = 6;
  opts.seed = 11;
  opts.kink_tolerance = 1e-5;
  const GradCheckReport r =
      grad_check_report([&] { return cross_entropy(net.forward(input, true), mask); }, wrt, opts);
  c.expect(r.max_error < 1e-4, "composite rel err " + sci(r.max_error));
  c.expect(r.skipped * 10 <= r.probes, "too many kink-straddling probes");
  c.note("worst layer " + sci(worst) + ", composite " + sci(r.max_error) + " over " +
         std::to_string(r.probes - r.skipped) + " probes (" + std::to_string(r.skipped) + " at kinks)");
}

void receptive_field(Checks& c) {
  auto density = [](const std::string& schedule) {
    const auto stack = dilated_stack(parse_rate_schedule(schedule));
    return receptive_field_mask(stack);
  };
  const ReceptiveFieldMask flat = density("(2,2,2)");
  c.expect(flat.reachable == 49 && flat.bbox_h == 13 && flat.bbox_w == 13 && flat.density == 49.0 / 169.0,
           "(2,2,2) density " + fixed(flat.density, 6));
  c.expect(density("(1,2,1)").density == 1.0, "(1,2,1) density");
  const double full = density("(1,2,1),(2,4,2),(4,8,4)").density;
  c.expect(full == 1.0, "multigrid stack density " + fixed(full, 6));
  const double plain = density("(2,2,2),(4,4,4),(8,8,8)").density;
  c.expect(plain < 0.35, "plain stack density " + fixed(plain, 6));
  c.note("(2,2,2)=49/169, MG stack 1.0, plain stack " + fixed(plain, 4));
}

void convolution_oracle(Checks& c) {
  Rng rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(2), in_c = 1 + rng.below(4), out_c = 1 + rng.below(4);
    const std::size_t k = 1 + 2 * rng.below(3);  // 1, 3 or 5
    const std::size_t stride = 1 + rng.below(3), rate = 1 + rng.below(4), pad = rng.below(2 * rate + 1);
    const std::size_t extent = (k - 1) * rate + 1;
    const std::size_t h = std::max<std::size_t>(extent, 4 + rng.below(12));
    const std::size_t w = std::max<std::size_t>(extent, 4 + rng.below(12));
    const bool bias = rng.below(2);
    const Tensor x = oracle::random_tensor({n, in_c, h, w}, rng);
    const ConvParams p = random_conv(out_c, in_c, k, rng, stride, pad, rate, bias);
    const auto ref = oracle::direct_conv(x, p.weight, bias ? &p.bias : nullptr, static_cast<long>(stride),
                                         static_cast<long>(pad), static_cast<long>(rate));
    const Tensor y = conv2d(x, p);
    if (y.numel() != ref.size()) {
      c.expect(false, "output size mismatch at trial " + std::to_string(trial));
      continue;
    }
    worst = std::max(worst, oracle::max_abs_diff(y.data(), ref));
  }
  c.expect(worst < 1e-12, "max abs diff " + sci(worst));
  c.note("100 configurations, max abs diff " + sci(worst));
}

void metric_oracles(Checks& c) {
  Rng rng(404);
  double mcc_err = 0.0, auc_err = 0.0, iou_err = 0.0;
  bool counts_exact = true;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> prob(32 * 32);
    std::vector<std::uint8_t> gt(32 * 32);
    // Mixed resolutions so both ties and distinct scores occur.
    const std::uint64_t levels = trial % 2 ? 17 : 1u << 20;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      gt[i] = static_cast<std::uint8_t>(rng.uniform() < 0.2);
      prob[i] = static_cast<double>(rng.below(levels)) / static_cast<double>(levels - 1);
      // Half the instances carry signal, so MCC and AUC spread over their range.
      if (trial % 4 >= 2) prob[i] = 0.4 * gt[i] + 0.6 * prob[i];
    }
    const ConfusionCounts k = confusion(prob, gt);
    const auto o = oracle::loop_confusion(prob, gt, 0.5);
    counts_exact &= k.tp == o.tp && k.fp == o.fp && k.tn == o.tn && k.fn == o.fn;
    const Score m = mcc(k);
    if (!m.degenerate) {
      mcc_err = std::max(mcc_err, std::abs(m.value - oracle::textbook_mcc(k.tp, k.fp, k.tn, k.fn)));
    }
    auc_err = std::max(auc_err, std::abs(roc_auc(prob, gt).auc.value - oracle::pair_count_auc(prob, gt)));
    const Score f1 = basic_metrics(k).f1;
    if (!f1.degenerate) {
      iou_err = std::max(iou_err, std::abs(iou_foreground(k).value - f1.value / (2.0 - f1.value)));
    }
  }
  c.expect(counts_exact, "confusion counts differ from the pixel loop");
  c.expect(mcc_err < 1e-12, "mcc err " + sci(mcc_err));
  c.expect(auc_err < 1e-12, "auc err " + sci(auc_err));
  c.expect(iou_err < 1e-12, "iou identity err " + sci(iou_err));
  c.note("mcc " + sci(mcc_err) + ", auc " + sci(auc_err) + ", iou " + sci(iou_err));
}

void normalization(Checks& c) {
  Rng rng(505);
  // Output variance is var/(var+eps): inputs spread over [-10,10].
  const Tensor x = oracle::random_tensor({4, 3, 6, 6}, rng, -10, 10);
  NormState bn = NormState::make(NormKind::Batch, 3);
  const Tensor y = batch_norm(x, bn, true);
  double mean_err = 0.0, var_err = 0.0;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double s = 0.0, sq = 0.0;
    std::size_t cnt = 0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 36; ++i) {
        const double v = y.data()[(n * 3 + ch) * 36 + i];
        s += v;
        sq += v * v;
        ++cnt;
      }
    const double mean = s / static_cast<double>(cnt);
    mean_err = std::max(mean_err, std::abs(mean));
    var_err = std::max(var_err, std::abs(sq / static_cast<double>(cnt) - mean * mean - 1.0));
  }
  c.expect(mean_err < 1e-8, "BN mean " + sci(mean_err));
  c.expect(var_err < 1e-6, "BN |var-1| " + sci(var_err));

  const Tensor z = oracle::random_tensor({2, 6, 5, 5}, rng, -3, 3);
  NormState gn = NormState::make(NormKind::Group, 6, 6);
  NormState in = NormState::make(NormKind::Instance, 6);
  const double gn_in = oracle::max_abs_diff(group_norm(z, gn).data(), instance_norm(z, in).data());
  c.expect(gn_in < 1e-12, "GN(groups=c) vs IN " + sci(gn_in));

  // Dyadic values on 4x4 planes keep every sum exact, so a per-plane shift
  // must leave the output bit-identical.
  std::vector<double> base(2 * 6 * 16), shifted(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    base[i] = static_cast<double>(static_cast<int>(rng.below(64)) - 32) / 8.0;
    shifted[i] = base[i] + static_cast<double>(i / 16) * 0.75 - 2.5;
  }
  const Tensor a = instance_norm(Tensor::from({2, 6, 4, 4}, base), in);
  const Tensor b = instance_norm(Tensor::from({2, 6, 4, 4}, shifted), in);
  c.expect(oracle::max_abs_diff(a.data(), b.data()) == 0.0, "IN shift invariance not exact");

  NetworkSpec spec = NetworkSpec::make(Variant::CIEUNet);
  spec.base_width = 16;
  spec.norm = NormKind::Instance;
  Network net = build_network(spec);
  std::size_t context = 0, other = 0;
  bool rule = true;
  for (const NormLayer& n : net.layers().norms()) {
    rule &= n.state.kind == (n.in_context ? NormKind::Batch : NormKind::Instance);
    (n.in_context ? context : other) += 1;
  }
  c.expect(rule && context > 0 && other > 0, "context-module norm rule");
  c.note("BN mean " + sci(mean_err) + " |var-1| " + sci(var_err) + ", GN=IN " + sci(gn_in) + ", " +
         std::to_string(other) + " IN + " + std::to_string(context) + " context BN");
}

void recipe_constants(Checks& c) {
  const TrainConfig d;
  c.expect(d.lr0 == 1e-3 && d.poly_power == 0.9 && d.clip_norm == 0.5 && d.weight_decay == 1e-5 &&
               d.adam_beta1 == 0.5 && d.adam_beta2 == 0.999 && d.patch == 64 && d.batch == 64 &&
               d.max_steps == 30000,
           "recipe defaults");
  c.expect(poly_lr(0, d) == 1e-3, "poly_lr(0)");
  c.expect(poly_lr(d.max_steps, d) == 0.0, "poly_lr(max)");
  bool decreasing = true;
  for (std::size_t s = 1; s <= d.max_steps; ++s) decreasing &= poly_lr(s, d) < poly_lr(s - 1, d);
  c.expect(decreasing, "poly_lr strictly decreasing");

  Rng rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tensor> ps;
    for (int k = 0; k < 4; ++k) {
      Tensor p = oracle::random_tensor({1, 3, 4, 4}, rng, -1, 1, true);
      const Tensor g = oracle::random_tensor(p.shape(), rng, -10, 10);
      p.accumulate_grad(g.data());
      ps.push_back(p);
    }
    clip_grad_l2(ps, 0.5);
    worst = std::max(worst, global_grad_norm(ps));
  }
  c.expect(worst <= 0.5 + 1e-12, "post-clip norm " + fixed(worst, 15));

  double adam_err = 0.0;
  TrainConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor p = oracle::random_tensor({1, 1, 2, 3}, rng, -1, 1, true);
    const Tensor g = oracle::random_tensor(p.shape(), rng, -2, 2);
    const std::vector<double> before(p.data().begin(), p.data().end());
    p.accumulate_grad(g.data());
    AdamState st;
    std::vector<Tensor> ps{p};
    adam_step(ps, st, 0.1, cfg);
    for (std::size_t i = 0; i < before.size(); ++i) {
      // m_hat = g and v_hat = g^2 after one bias-corrected step.
      const double gi = g.data()[i];
      const double expect = before[i] - 0.1 * gi / (std::abs(gi) + cfg.adam_eps);
      adam_err = std::max(adam_err, std::abs(p.data()[i] - expect));
    }
  }
  c.expect(adam_err < 1e-12, "adam first step err " + sci(adam_err));
  c.expect(normalize_pixel(0) == -1.0 && normalize_pixel(255) == 1.0, "input normalization endpoints");
  c.note("clip max " + fixed(worst, 12) + ", adam err " + sci(adam_err));
}

struct OverfitRun {
  double loss = 0.0;
  double f1 = 0.0;
  double seconds = 0.0;
};

OverfitRun overfit(const NetworkSpec& spec, const Sample& sample) {
  const auto t0 = std::chrono::steady_clock::now();
  Network net = build_network(spec);
  TrainConfig cfg;
  cfg.batch = 8;
  cfg.max_steps = 500;
  cfg.seed = 1;
  const std::vector<LossRow> rows = train(std::span<const Sample>(&sample, 1), net, cfg);
  OverfitRun r;
  r.loss = rows.back().loss;
  r.f1 = evaluate_image(net, sample).f1;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

void trainability(Checks& c) {
  SynthConfig sc;
  sc.seed = 1;
  const Sample sample = synth_vessel_sample(sc);

  NetworkSpec cieu = NetworkSpec::make(Variant::CIEUNet);
  cieu.base_width = 16;
  cieu.norm = NormKind::Instance;
  const OverfitRun full = overfit(cieu, sample);
  c.expect(full.f1 >= 0.95, "CIEU-Net F1 " + fixed(full.f1));
  c.expect(full.loss < 0.05, "CIEU-Net loss " + fixed(full.loss));

  NetworkSpec backbone = NetworkSpec::make(Variant::BackboneFCN);
  backbone.base_width = 16;
  NetworkSpec dilated = NetworkSpec::make(Variant::Dilated);
  dilated.base_width = 16;
  dilated.dilated_stride = 4;
  dilated.multigrid = false;
  const OverfitRun coarse = overfit(backbone, sample);
  const OverfitRun fine = overfit(dilated, sample);
  c.expect(coarse.f1 < fine.f1, "backbone F1 " + fixed(coarse.f1) + " not below 1/4 dilated " + fixed(fine.f1));

  const double total = full.seconds + coarse.seconds + fine.seconds;
  c.expect(total < 1800.0, "runtime " + fixed(total, 0) + " s");
  c.note("CIEU-Net loss " + fixed(full.loss) + " F1 " + fixed(full.f1) + "; backbone 1/16 F1 " +
         fixed(coarse.f1) + " < 1/4 dilated F1 " + fixed(fine.f1) + "; " + fixed(total, 0) + " s");
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& cli, const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + cli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

void determinism(Checks& c, const std::string& cli, const fs::path& work) {
  if (cli.empty()) {
    c.expect(false, "no --cli binary given");
    return;
  }
  const fs::path cfg = work / "determinism.cfg";
  std::ofstream(cfg) << "variant = CIEUNet\n"
                        "norm = BN\n"
                        "base_width = 8\n"
                        "batch = 4\n"
                        "max_steps = 20\n"
                        "log_every = 1\n"
                        "checkpoint_every = 10\n"
                        "synth_images = 2\n"
                        "synth_size = 64\n";
  const std::string common = "--serial train --config \"" + cfg.string() + "\" --seed 7 --out ";
  const int a = run_cli(cli, common + "\"" + (work / "run_a").string() + "\"", work / "run_a.log");
  const int b = run_cli(cli, common + "\"" + (work / "run_b").string() + "\"", work / "run_b.log");
  c.expect(a == 0 && b == 0, "training command failed");
  if (a != 0 || b != 0) return;
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(work / "run_a")) {
    const fs::path other = work / "run_b" / entry.path().filename();
    c.expect(fs::exists(other), "missing " + other.string());
    c.expect(slurp(entry.path()) == slurp(other), entry.path().filename().string() + " differs");
    ++compared;
  }
  c.expect(compared >= 4, "expected config, loss CSV and checkpoints");
  c.note(std::to_string(compared) + " files bitwise identical");
}

void ablation(Checks& c, const std::string& cli, const fs::path& work) {
  if (cli.empty()) {
    c.expect(false, "no --cli binary given");
    return;
  }
  // 96px patches keep the 6x6 pyramid bin on the 1/16 backbone.
  const fs::path cfg = work / "ablation.cfg";
  std::ofstream(cfg) << "base_width = 4\n"
                        "patch = 96\n"
                        "batch = 4\n"
                        "max_steps = 60\n"
                        "log_every = 10\n"
                        "synth_images = 2\n"
                        "synth_size = 96\n"
                        "eval_patch = 96\n"
                        "eval_stride = 48\n";
  const fs::path out = work / "ablation";
  const int rc = run_cli(cli, "--serial ablate --config \"" + cfg.string() + "\" --out \"" + out.string() + "\"",
                         work / "ablation.log");
  c.expect(rc == 0, "ablate command failed: " + slurp(work / "ablation.log"));
  if (rc != 0) return;

  std::istringstream in(slurp(out / "ablation.csv"));
  std::string line;
  std::getline(in, line);
  c.expect(line.rfind("variant,tables,", 0) == 0 && line.find(",f1,mcc,iou_fg,miou,auc") != std::string::npos,
           "header " + line);
  std::vector<std::string> rows;
  std::set<std::string> tables;
  bool values_ok = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 21) {
      values_ok = false;
      continue;
    }
    rows.push_back(cells[0]);
    std::stringstream ts(cells[1]);
    while (std::getline(ts, cell, ';')) tables.insert(cell);
    for (std::size_t i = 12; i < 21; ++i) {
      const double v = std::stod(cells[i]);
      values_ok &= std::isfinite(v) && v >= -1.0 && v <= 1.0;
    }
    values_ok &= std::isfinite(std::stod(cells[11]));
  }
  std::vector<std::string> expected;
  for (const auto& v : ablation_grid(NetworkSpec{})) expected.push_back(v.name);
  c.expect(rows == expected, "row set differs from the grid");
  c.expect(values_ok, "malformed or out-of-range metric cells");
  c.expect(tables == std::set<std::string>{"5", "6", "7", "8"}, "tables 5-8 not all covered");
  c.note(std::to_string(rows.size()) + " variants trained and scored -> " + (out / "ablation.csv").string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string cli;
  std::string work = (fs::temp_directory_path() / "vnseg_acceptance").string();
  std::vector<int> only;
  app.add_option("--cli", cli, "vnseg binary used by the command-level criteria");
  app.add_option("--work", work, "scratch directory (recreated)");
  app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  set_num_threads(1);
  const fs::path wd(work);
  fs::remove_all(wd);
  fs::create_directories(wd);

  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0: no runtime bound
    std::function<void(Checks&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", 120, gradient_correctness},
      {2, "receptive-field oracle", 1, receptive_field},
      {3, "convolution oracle", 60, convolution_oracle},
      {4, "metric oracles", 60, metric_oracles},
      {5, "normalization invariants", 0, normalization},
      {6, "recipe constants", 0, recipe_constants},
      {7, "overfit trainability", 0, trainability},  // bounds its own runtime
      {8, "determinism", 0, [&](Checks& c) { determinism(c, cli, wd); }},
      {9, "ablation harness", 0, [&](Checks& c) { ablation(c, cli, wd); }},
  };

  bool all = true;
  for (const Criterion& k : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), k.id) == only.end()) continue;
    Checks checks;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      k.run(checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (k.budget_s > 0) checks.expect(secs < k.budget_s, "runtime over " + fixed(k.budget_s, 0) + " s");
    all &= checks.ok();
    std::printf("%s %d %s (%.1f s): %s\n", checks.ok() ? "PASS" : "FAIL", k.id, k.name, secs,
                checks.summary().c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
