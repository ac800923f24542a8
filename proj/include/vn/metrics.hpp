#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vn/arch.hpp"
#include "vn/image.hpp"

namespace vn {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// A metric value; `degenerate` marks a zero denominator, in which case the
/// value is the sentinel 0.
struct Score {
  double value = 0.0;
  bool degenerate = false;
};

/// Pixels with prob >= threshold are predicted vessel. Only pixels where
/// `fov` is nonzero count; an empty `fov` selects every pixel.
ConfusionCounts confusion(std::span<const double> prob, std::span<const std::uint8_t> gt,
                          double threshold = 0.5, std::span<const std::uint8_t> fov = {});

struct BasicMetrics {
  Score acc, se, sp, prec, f1;
};

BasicMetrics basic_metrics(const ConfusionCounts& c);

/// (tp/N - S*P) / sqrt(P*S*(1-P)*(1-S)) with S = (tp+fn)/N, P = (tp+fp)/N.
Score mcc(const ConfusionCounts& c);
Score iou_foreground(const ConfusionCounts& c);
Score iou_background(const ConfusionCounts& c);
/// Mean of the vessel and background IoU.
Score miou(const ConfusionCounts& c);

struct RocCurve {
  std::vector<double> thresholds;  // +inf first, then distinct scores descending, then 0-
  std::vector<double> fpr;
  std::vector<double> tpr;
};

struct AucResult {
  Score auc;
  RocCurve curve;
};

/// Sweeps every distinct probability as a threshold and integrates TPR over
/// FPR with the trapezoid rule.
AucResult roc_auc(std::span<const double> prob, std::span<const std::uint8_t> gt,
                  std::span<const std::uint8_t> fov = {});

struct MetricRecord {
  std::string image;
  double acc = 0, se = 0, sp = 0, prec = 0, f1 = 0, mcc = 0, iou_fg = 0, miou = 0, auc = 0;
  bool degenerate = false;  // some metric fell back to its sentinel
};

MetricRecord metric_record(const std::string& name, std::span<const double> prob,
                           std::span<const std::uint8_t> gt, std::span<const std::uint8_t> fov,
                           double threshold);

struct TileConfig {
  std::size_t patch = 64;
  std::size_t stride = 32;
  std::size_t batch = 16;  // tiles per forward pass
};

/// Full-resolution vessel probability (row-major h*w) from overlapping tiles,
/// averaged where tiles overlap. Runs in inference mode.
std::vector<double> predict_probability(Network& net, const Image& image, const TileConfig& tiles = {});

MetricRecord evaluate_image(Network& net, const Sample& sample, double threshold = 0.5,
                            const TileConfig& tiles = {});

/// Column-wise mean, labelled "mean".
MetricRecord mean_record(std::span<const MetricRecord> records);

/// Header "image,acc,se,sp,prec,f1,mcc,iou_fg,miou,auc", one row per record,
/// then the mean row.
void write_metrics_csv(std::ostream& out, std::span<const MetricRecord> records);

}  // namespace vn
