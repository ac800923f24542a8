#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "vn/error.hpp"
#include "vn/metrics.hpp"
#include "vn/synth.hpp"

using namespace vn;

namespace {

struct Pair {
  std::vector<double> prob;
  std::vector<std::uint8_t> gt;
};

// Probabilities quantized to 1/16 so ties and exact threshold hits occur.
Pair random_pair(std::size_t n, Rng& rng) {
  Pair p;
  for (std::size_t i = 0; i < n; ++i) {
    p.gt.push_back(static_cast<std::uint8_t>(rng.below(2)));
    p.prob.push_back(static_cast<double>(rng.below(17)) / 16.0);
  }
  return p;
}

ConfusionCounts counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
  return {tp, fp, tn, fn};
}

}  // namespace

TEST_CASE("confusion matches the pixel loop") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Pair p = random_pair(32 * 32, rng);
    const ConfusionCounts c = confusion(p.prob, p.gt);
    const auto o = oracle::loop_confusion(p.prob, p.gt, 0.5);
    CHECK(c.tp == o.tp);
    CHECK(c.fp == o.fp);
    CHECK(c.tn == o.tn);
    CHECK(c.fn == o.fn);
    CHECK(c.total() == 32 * 32);
  }
  const std::vector<std::uint8_t> gt{1, 0, 1, 0};
  const std::vector<double> same{1, 0, 1, 0}, inverse{0, 1, 0, 1};
  CHECK(confusion(same, gt) == counts(2, 0, 2, 0));
  CHECK(confusion(inverse, gt) == counts(0, 2, 0, 2));
  CHECK(confusion(std::vector<double>{0.5}, std::vector<std::uint8_t>{1}).tp == 1);

  const std::vector<std::uint8_t> fov{1, 1, 0, 0};
  CHECK(confusion(inverse, gt, 0.5, fov).total() == 2);
  CHECK_THROWS_AS(confusion(same, std::vector<std::uint8_t>{1, 0}), Error);
  CHECK_THROWS_AS(confusion(same, std::vector<std::uint8_t>{1, 0, 2, 0}), Error);
  CHECK_THROWS_AS(confusion(std::vector<double>{0, 1.5, 0, 0}, gt), Error);
}

TEST_CASE("basic metrics") {
  const BasicMetrics m = basic_metrics(counts(50, 10, 930, 10));
  CHECK(m.se.value == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(m.prec.value == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(m.f1.value == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(m.acc.value == doctest::Approx(0.98).epsilon(1e-15));
  CHECK(m.sp.value == doctest::Approx(930.0 / 940.0).epsilon(1e-15));

  const BasicMetrics perfect = basic_metrics(counts(10, 0, 20, 0));
  for (const Score* s : {&perfect.acc, &perfect.se, &perfect.sp, &perfect.prec, &perfect.f1}) {
    CHECK(s->value == 1.0);
    CHECK_FALSE(s->degenerate);
  }

  const BasicMetrics background = basic_metrics(counts(0, 0, 20, 10));
  CHECK(background.se.value == 0.0);
  CHECK_FALSE(background.se.degenerate);
  CHECK(background.prec.degenerate);
  CHECK(background.prec.value == 0.0);
  CHECK(background.f1.degenerate);
}

TEST_CASE("mcc") {
  CHECK(mcc(counts(10, 0, 20, 0)).value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mcc(counts(7, 7, 7, 7)).value == 0.0);
  const Score worked = mcc(counts(90, 20, 880, 10));
  CHECK(worked.value == doctest::Approx(0.079 / std::sqrt(0.11 * 0.1 * 0.89 * 0.9)).epsilon(1e-12));
  CHECK(worked.value == doctest::Approx(0.8416).epsilon(1e-4));
  CHECK(std::abs(worked.value - oracle::textbook_mcc(90, 20, 880, 10)) < 1e-12);

  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const ConfusionCounts c = counts(1 + rng.below(500), 1 + rng.below(500), 1 + rng.below(500),
                                     1 + rng.below(500));
    const double v = mcc(c).value;
    CHECK(std::abs(v - oracle::textbook_mcc(c.tp, c.fp, c.tn, c.fn)) < 1e-12);
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
    CHECK(std::abs(v - mcc(counts(c.tn, c.fn, c.tp, c.fp)).value) < 1e-12);
  }
  CHECK(mcc(counts(0, 0, 5, 0)).degenerate);
  CHECK_THROWS_AS(mcc(counts(0, 0, 0, 0)), Error);
}

TEST_CASE("iou") {
  const ConfusionCounts perfect = counts(10, 0, 20, 0);
  CHECK(iou_foreground(perfect).value == 1.0);
  CHECK(miou(perfect).value == 1.0);
  const ConfusionCounts c = counts(30, 5, 60, 5);
  CHECK(iou_foreground(c).value == 30.0 / 40.0);
  CHECK(iou_background(c).value == 60.0 / 70.0);
  CHECK(miou(c).value == (30.0 / 40.0 + 60.0 / 70.0) / 2.0);

  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const ConfusionCounts r = counts(1 + rng.below(300), rng.below(300), rng.below(300), rng.below(300));
    const double f1 = basic_metrics(r).f1.value;
    CHECK(std::abs(iou_foreground(r).value - f1 / (2.0 - f1)) < 1e-12);
  }

  // Two-class mean reading: F1 0.8239 implies a vessel IoU near 0.70.
  const double f1 = 0.8239;
  CHECK(f1 / (2.0 - f1) == doctest::Approx(0.7005).epsilon(1e-3));
  CHECK(iou_foreground(counts(0, 0, 9, 0)).degenerate);
}

TEST_CASE("auc equals the pair-counting statistic") {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    Pair p = random_pair(20, rng);
    p.gt[0] = 0;
    p.gt[1] = 1;
    const AucResult r = roc_auc(p.prob, p.gt);
    CHECK(std::abs(r.auc.value - oracle::pair_count_auc(p.prob, p.gt)) < 1e-12);
    CHECK(r.curve.fpr.front() == 0.0);
    CHECK(r.curve.tpr.front() == 0.0);
    CHECK(r.curve.fpr.back() == 1.0);
    CHECK(r.curve.tpr.back() == 1.0);
    CHECK(std::is_sorted(r.curve.fpr.begin(), r.curve.fpr.end()));
  }
  const std::vector<std::uint8_t> gt{1, 0, 0, 1, 0};
  CHECK(roc_auc(std::vector<double>{1, 0, 0, 1, 0}, gt).auc.value == 1.0);
  CHECK(roc_auc(std::vector<double>(5, 0.3), gt).auc.value == 0.5);
  const AucResult single = roc_auc(std::vector<double>{0.1, 0.9}, std::vector<std::uint8_t>{1, 1});
  CHECK(single.auc.degenerate);
}

TEST_CASE("metrics ignore pixel order") {
  Rng rng(5);
  Pair p = random_pair(400, rng);
  const MetricRecord a = metric_record("a", p.prob, p.gt, {}, 0.5);
  std::vector<std::size_t> perm(p.prob.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  Pair q;
  for (auto i : perm) {
    q.prob.push_back(p.prob[i]);
    q.gt.push_back(p.gt[i]);
  }
  const MetricRecord b = metric_record("b", q.prob, q.gt, {}, 0.5);
  CHECK(a.acc == b.acc);
  CHECK(a.f1 == b.f1);
  CHECK(a.mcc == b.mcc);
  CHECK(a.miou == b.miou);
  CHECK(a.auc == b.auc);
}

TEST_CASE("tiled inference") {
  NetworkSpec spec = NetworkSpec::make(Variant::CIEUNet);
  spec.base_width = 4;
  Network net = build_network(spec);
  ConvParams& cls = net.layers().conv(net.layers().conv_count() - 1).params;
  std::fill(cls.weight.mutable_data().begin(), cls.weight.mutable_data().end(), 0.0);
  cls.bias.mutable_data()[0] = -0.4;
  cls.bias.mutable_data()[1] = 0.9;

  SynthConfig sc;
  sc.height = 100;  // tiles at 0 and 32, then a final one flush at 36
  sc.width = 72;
  Sample s = synth_vessel_sample(sc);
  const std::vector<double> prob = predict_probability(net, s.image);
  REQUIRE(prob.size() == 100 * 72);
  for (double v : prob) CHECK(v == prob[0]);
  CHECK(prob[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.3))).epsilon(1e-14));

  const MetricRecord r = evaluate_image(net, s);
  CHECK(r.image == s.name);
  CHECK(r.se == 1.0);  // every pixel is predicted vessel
  CHECK(r.auc == 0.5);
  CHECK(r.degenerate);

  Image small = Image::blank(3, 40, 80);
  CHECK_THROWS_AS(predict_probability(net, small), Error);
}

TEST_CASE("metric csv") {
  MetricRecord a;
  a.image = "x";
  a.acc = 1.0;
  a.f1 = 0.5;
  MetricRecord b = a;
  b.image = "y";
  b.f1 = 0.25;
  std::ostringstream out;
  const std::vector<MetricRecord> rs{a, b};
  write_metrics_csv(out, rs);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "image,acc,se,sp,prec,f1,mcc,iou_fg,miou,auc");
  std::getline(in, line);
  CHECK(line.rfind("x,1.0000000000,", 0) == 0);
  std::getline(in, line);
  std::getline(in, line);
  CHECK(line.rfind("mean,", 0) == 0);
  CHECK(line.find(",0.3750000000,") != std::string::npos);
  CHECK(std::count(line.begin(), line.end(), ',') == 9);
}
