#include "vn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "vn/error.hpp"
#include "vn/ops.hpp"
#include "vn/train.hpp"

namespace vn {

namespace {

void check_grids(std::span<const double> prob, std::span<const std::uint8_t> gt,
                 std::span<const std::uint8_t> fov) {
  if (prob.size() != gt.size()) {
    fail(ErrorCode::Shape, "prediction has " + std::to_string(prob.size()) +
                               " pixels, ground truth " + std::to_string(gt.size()));
  }
  if (!fov.empty() && fov.size() != gt.size()) {
    fail(ErrorCode::Shape, "fov mask extent does not match the ground truth");
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] > 1) {
      fail(ErrorCode::Data, "ground truth value " + std::to_string(gt[i]) + " at pixel " +
                                std::to_string(i) + " outside {0,1}");
    }
    if (!(prob[i] >= 0.0 && prob[i] <= 1.0)) {
      fail(ErrorCode::Data, "probability at pixel " + std::to_string(i) + " outside [0,1]");
    }
  }
}

Score ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

std::vector<std::size_t> tile_starts(std::size_t extent, std::size_t patch, std::size_t stride) {
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + patch <= extent; s += stride) starts.push_back(s);
  if (starts.back() + patch < extent) starts.push_back(extent - patch);
  return starts;
}

}  // namespace

ConfusionCounts confusion(std::span<const double> prob, std::span<const std::uint8_t> gt,
                          double threshold, std::span<const std::uint8_t> fov) {
  check_grids(prob, gt, fov);
  ConfusionCounts c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!fov.empty() && !fov[i]) continue;
    const bool pred = prob[i] >= threshold;
    if (gt[i]) {
      pred ? ++c.tp : ++c.fn;
    } else {
      pred ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

BasicMetrics basic_metrics(const ConfusionCounts& c) {
  BasicMetrics m;
  m.acc = ratio(c.tp + c.tn, c.total());
  m.se = ratio(c.tp, c.tp + c.fn);
  m.sp = ratio(c.tn, c.tn + c.fp);
  m.prec = ratio(c.tp, c.tp + c.fp);
  if (m.se.degenerate || m.prec.degenerate || m.se.value + m.prec.value == 0.0) {
    m.f1 = {0.0, true};
  } else {
    m.f1 = {2.0 * m.prec.value * m.se.value / (m.prec.value + m.se.value), false};
  }
  return m;
}

Score mcc(const ConfusionCounts& c) {
  const std::uint64_t total = c.total();
  if (total == 0) fail(ErrorCode::Argument, "mcc of an empty confusion matrix");
  const double n = static_cast<double>(total);
  const double s = static_cast<double>(c.tp + c.fn) / n;
  const double p = static_cast<double>(c.tp + c.fp) / n;
  const double radicand = p * s * (1.0 - p) * (1.0 - s);
  if (radicand <= 0.0) return {0.0, true};
  return {(static_cast<double>(c.tp) / n - s * p) / std::sqrt(radicand), false};
}

Score iou_foreground(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp + c.fn); }

Score iou_background(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fp + c.fn); }

Score miou(const ConfusionCounts& c) {
  const Score fg = iou_foreground(c);
  const Score bg = iou_background(c);
  return {(fg.value + bg.value) / 2.0, fg.degenerate || bg.degenerate};
}

AucResult roc_auc(std::span<const double> prob, std::span<const std::uint8_t> gt,
                  std::span<const std::uint8_t> fov) {
  check_grids(prob, gt, fov);
  std::vector<std::size_t> order;
  std::uint64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!fov.empty() && !fov[i]) continue;
    order.push_back(i);
    gt[i] ? ++pos : ++neg;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return prob[a] > prob[b]; });

  AucResult r;
  const double inf = std::numeric_limits<double>::infinity();
  r.curve.thresholds.push_back(inf);
  std::vector<std::uint64_t> tps{0}, fps{0};
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double t = prob[order[k]];
    while (k < order.size() && prob[order[k]] == t) {
      gt[order[k]] ? ++tp : ++fp;
      ++k;
    }
    r.curve.thresholds.push_back(t);
    tps.push_back(tp);
    fps.push_back(fp);
  }
  r.curve.thresholds.push_back(-std::numeric_limits<double>::denorm_min());
  tps.push_back(pos);
  fps.push_back(neg);

  const bool degenerate = pos == 0 || neg == 0;
  // Twice the trapezoid area in count units; exact in integers.
  std::uint64_t twice_area = 0;
  for (std::size_t i = 0; i < tps.size(); ++i) {
    r.curve.fpr.push_back(neg ? static_cast<double>(fps[i]) / static_cast<double>(neg) : 0.0);
    r.curve.tpr.push_back(pos ? static_cast<double>(tps[i]) / static_cast<double>(pos) : 0.0);
    if (i > 0) twice_area += (fps[i] - fps[i - 1]) * (tps[i] + tps[i - 1]);
  }
  if (degenerate) {
    r.auc = {0.0, true};
  } else {
    r.auc = {static_cast<double>(twice_area) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg)),
             false};
  }
  return r;
}

MetricRecord metric_record(const std::string& name, std::span<const double> prob,
                           std::span<const std::uint8_t> gt, std::span<const std::uint8_t> fov,
                           double threshold) {
  const ConfusionCounts c = confusion(prob, gt, threshold, fov);
  if (c.total() == 0) fail(ErrorCode::Data, name + ": no pixels to evaluate");
  const BasicMetrics b = basic_metrics(c);
  const Score m = mcc(c);
  const Score fg = iou_foreground(c);
  const Score mi = miou(c);
  const Score a = roc_auc(prob, gt, fov).auc;
  MetricRecord r;
  r.image = name;
  r.acc = b.acc.value;
  r.se = b.se.value;
  r.sp = b.sp.value;
  r.prec = b.prec.value;
  r.f1 = b.f1.value;
  r.mcc = m.value;
  r.iou_fg = fg.value;
  r.miou = mi.value;
  r.auc = a.value;
  r.degenerate = b.acc.degenerate || b.se.degenerate || b.sp.degenerate || b.prec.degenerate ||
                 b.f1.degenerate || m.degenerate || fg.degenerate || mi.degenerate || a.degenerate;
  return r;
}

std::vector<double> predict_probability(Network& net, const Image& image, const TileConfig& tiles) {
  const std::size_t p = tiles.patch;
  if (p == 0 || tiles.stride == 0 || tiles.batch == 0) fail(ErrorCode::Config, "bad tile configuration");
  if (image.height < p || image.width < p) {
    fail(ErrorCode::Data, "image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                              " is smaller than the " + std::to_string(p) + "px tile");
  }
  std::vector<std::pair<std::size_t, std::size_t>> corners;
  for (std::size_t y : tile_starts(image.height, p, tiles.stride)) {
    for (std::size_t x : tile_starts(image.width, p, tiles.stride)) corners.emplace_back(y, x);
  }

  const std::size_t w = image.width;
  // Running mean per pixel, so equal tile values reassemble exactly.
  std::vector<double> mean(image.plane(), 0.0);
  std::vector<double> count(image.plane(), 0.0);
  NoGradGuard no_grad;
  for (std::size_t first = 0; first < corners.size(); first += tiles.batch) {
    const std::size_t last = std::min(corners.size(), first + tiles.batch);
    std::vector<Patch> batch;
    for (std::size_t k = first; k < last; ++k) {
      const auto [y0, x0] = corners[k];
      Patch tile{Image::blank(image.channels, p, p), Image{}};
      for (std::size_t c = 0; c < image.channels; ++c)
        for (std::size_t y = 0; y < p; ++y)
          for (std::size_t x = 0; x < p; ++x) tile.image.at(c, y, x) = image.at(c, y0 + y, x0 + x);
      batch.push_back(std::move(tile));
    }
    const Tensor logits = net.forward(normalize_input(batch), false);
    const auto l = logits.data();
    const std::size_t plane = p * p;
    for (std::size_t k = first; k < last; ++k) {
      const auto [y0, x0] = corners[k];
      const double* l0 = l.data() + (k - first) * 2 * plane;
      const double* l1 = l0 + plane;
      for (std::size_t y = 0; y < p; ++y) {
        for (std::size_t x = 0; x < p; ++x) {
          const std::size_t i = y * p + x;
          const std::size_t o = (y0 + y) * w + x0 + x;
          count[o] += 1.0;
          mean[o] += (1.0 / (1.0 + std::exp(l0[i] - l1[i])) - mean[o]) / count[o];
        }
      }
    }
  }
  return mean;
}

MetricRecord evaluate_image(Network& net, const Sample& sample, double threshold,
                            const TileConfig& tiles) {
  if (sample.mask.height != sample.image.height || sample.mask.width != sample.image.width) {
    fail(ErrorCode::Shape, sample.name + ": mask extent does not match the image");
  }
  const std::vector<double> prob = predict_probability(net, sample.image, tiles);
  return metric_record(sample.name, prob, sample.mask.pixels, sample.fov.pixels, threshold);
}

MetricRecord mean_record(std::span<const MetricRecord> records) {
  MetricRecord m;
  m.image = "mean";
  if (records.empty()) return m;
  for (const MetricRecord& r : records) {
    m.acc += r.acc;
    m.se += r.se;
    m.sp += r.sp;
    m.prec += r.prec;
    m.f1 += r.f1;
    m.mcc += r.mcc;
    m.iou_fg += r.iou_fg;
    m.miou += r.miou;
    m.auc += r.auc;
    m.degenerate = m.degenerate || r.degenerate;
  }
  const double n = static_cast<double>(records.size());
  for (double* v : {&m.acc, &m.se, &m.sp, &m.prec, &m.f1, &m.mcc, &m.iou_fg, &m.miou, &m.auc}) *v /= n;
  return m;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricRecord> records) {
  out << "image,acc,se,sp,prec,f1,mcc,iou_fg,miou,auc\n";
  auto row = [&out](const MetricRecord& r) {
    char buf[320];
    std::snprintf(buf, sizeof buf, "%s,%.10f,%.10f,%.10f,%.10f,%.10f,%.10f,%.10f,%.10f,%.10f\n",
                  r.image.c_str(), r.acc, r.se, r.sp, r.prec, r.f1, r.mcc, r.iou_fg, r.miou, r.auc);
    out << buf;
  };
  for (const MetricRecord& r : records) row(r);
  row(mean_record(records));
}

}  // namespace vn
