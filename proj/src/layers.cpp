#include <cmath>

#include "vn/arch.hpp"
#include "vn/error.hpp"

namespace vn {

std::size_t LayerTable::add_conv(std::string name, std::size_t in_c, std::size_t out_c,
                                 std::size_t kernel, std::size_t dilation, bool bias,
                                 bool in_context) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(in_c * kernel * kernel));
  std::vector<double> w(out_c * in_c * kernel * kernel);
  for (double& v : w) v = stddev * rng_.normal();
  ConvLayer layer;
  layer.name = std::move(name);
  layer.params.weight = Tensor::from({out_c, in_c, kernel, kernel}, std::move(w), true);
  if (bias) layer.params.bias = Tensor::zeros({1, out_c, 1, 1}, true);
  layer.params.dilation = dilation;
  layer.params.padding = (kernel / 2) * dilation;
  layer.in_context = in_context;
  convs_.push_back(std::move(layer));
  order_.push_back({LayerKind::Conv, convs_.size() - 1});
  return convs_.size() - 1;
}

std::size_t LayerTable::add_norm(std::string name, NormKind kind, std::size_t channels,
                                 bool in_context) {
  norms_.push_back({std::move(name), NormState::make(kind, channels), in_context});
  order_.push_back({LayerKind::Norm, norms_.size() - 1});
  return norms_.size() - 1;
}

std::vector<Tensor> LayerTable::parameters() const {
  std::vector<Tensor> out;
  for (const LayerRef& ref : order_) {
    if (ref.kind == LayerKind::Conv) {
      const ConvParams& p = convs_[ref.index].params;
      out.push_back(p.weight);
      if (p.bias.defined()) out.push_back(p.bias);
    } else {
      out.push_back(norms_[ref.index].state.gamma);
      out.push_back(norms_[ref.index].state.beta);
    }
  }
  return out;
}

std::vector<Tensor> LayerTable::conv_weights() const {
  std::vector<Tensor> out;
  for (const ConvLayer& c : convs_) out.push_back(c.params.weight);
  return out;
}

ResBlock ResBlock::build(LayerTable& t, const std::string& name, std::size_t in_c,
                         std::size_t out_c, std::size_t rate, NormKind norm) {
  ResBlock b;
  b.rate = rate;
  b.conv_a = t.add_conv(name + ".conv_a", in_c, out_c, 3, rate);
  b.norm_a = t.add_norm(name + ".norm_a", norm, out_c);
  b.conv_b = t.add_conv(name + ".conv_b", out_c, out_c, 3, rate);
  b.norm_b = t.add_norm(name + ".norm_b", norm, out_c);
  if (in_c != out_c) {
    const std::size_t pc = t.add_conv(name + ".proj", in_c, out_c, 1);
    const std::size_t pn = t.add_norm(name + ".proj_norm", norm, out_c);
    b.projection = std::make_pair(pc, pn);
  }
  return b;
}

Tensor ResBlock::forward(LayerTable& t, const Tensor& x, bool training) const {
  Tensor h = relu(t.apply_norm(norm_a, t.apply_conv(conv_a, x), training));
  h = t.apply_norm(norm_b, t.apply_conv(conv_b, h), training);
  const Tensor shortcut =
      projection ? t.apply_norm(projection->second, t.apply_conv(projection->first, x), training)
                 : x;
  return relu(add(h, shortcut));
}

DoubleConv DoubleConv::build(LayerTable& t, const std::string& name, std::size_t in_c,
                             std::size_t out_c, NormKind norm) {
  DoubleConv d;
  d.conv_a = t.add_conv(name + ".conv_a", in_c, out_c, 3);
  d.norm_a = t.add_norm(name + ".norm_a", norm, out_c);
  d.conv_b = t.add_conv(name + ".conv_b", out_c, out_c, 3);
  d.norm_b = t.add_norm(name + ".norm_b", norm, out_c);
  return d;
}

Tensor DoubleConv::forward(LayerTable& t, const Tensor& x, bool training) const {
  const Tensor h = relu(t.apply_norm(norm_a, t.apply_conv(conv_a, x), training));
  return relu(t.apply_norm(norm_b, t.apply_conv(conv_b, h), training));
}

Tensor ConvNormBranch::forward(LayerTable& t, const Tensor& x, bool training) const {
  return relu(t.apply_norm(norm, t.apply_conv(conv, x), training));
}

namespace {

ConvNormBranch context_branch(LayerTable& t, const std::string& name, std::size_t in_c,
                              std::size_t out_c, std::size_t kernel, std::size_t rate,
                              NormKind norm) {
  const std::size_t c = t.add_conv(name, in_c, out_c, kernel, rate, false, true);
  const std::size_t n = t.add_norm(name + "_norm", norm, out_c, true);
  return {c, n};
}

void check_context_channels(std::size_t channels, const char* what) {
  if (channels < 4 || channels % 4 != 0) {
    fail(ErrorCode::Config, std::string(what) + ": channel count " + std::to_string(channels) +
                                " must be a positive multiple of 4");
  }
}

}  // namespace

PspModule build_psp(LayerTable& t, std::size_t channels, NormKind norm,
                    std::vector<std::size_t> bins) {
  check_context_channels(channels, "psp");
  if (bins.empty()) fail(ErrorCode::Config, "psp: no pooling bins");
  PspModule m;
  m.channels = channels;
  m.bins = std::move(bins);
  const std::size_t reduced = channels / 4;
  for (std::size_t b : m.bins) {
    if (b == 0) fail(ErrorCode::Config, "psp: zero bin size");
    m.branches.push_back(context_branch(t, "psp.pool" + std::to_string(b), channels, reduced, 1, 1, norm));
  }
  m.fuse = context_branch(t, "psp.fuse", channels + reduced * m.bins.size(), channels, 3, 1, norm);
  return m;
}

std::vector<Tensor> PspModule::branch_outputs(LayerTable& t, const Tensor& x, bool training,
                                              ForwardTrace* trace) const {
  const Shape s = x.shape();
  std::size_t largest = 0;
  for (std::size_t b : bins) largest = std::max(largest, b);
  if (s.h < largest || s.w < largest) {
    fail(ErrorCode::Shape, "psp: input " + to_string(s) + " smaller than " +
                               std::to_string(largest) + "x" + std::to_string(largest));
  }
  std::vector<Tensor> outs;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const Tensor pooled = adaptive_avg_pool2d(x, bins[i], bins[i]);
    if (trace) trace->emplace_back("psp.pool" + std::to_string(bins[i]), pooled.shape());
    outs.push_back(upsample_bilinear(branches[i].forward(t, pooled, training), s.h, s.w));
  }
  return outs;
}

Tensor PspModule::forward(LayerTable& t, const Tensor& x, bool training, ForwardTrace* trace) const {
  std::vector<Tensor> parts{x};
  for (Tensor& b : branch_outputs(t, x, training, trace)) parts.push_back(std::move(b));
  return fuse.forward(t, concat_channels(parts), training);
}

AsppModule build_aspp(LayerTable& t, std::size_t channels, NormKind norm,
                      std::vector<std::size_t> rates) {
  check_context_channels(channels, "aspp");
  if (rates.empty()) fail(ErrorCode::Config, "aspp: no dilation rates");
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i] == 0) fail(ErrorCode::Config, "aspp: zero dilation rate");
    for (std::size_t j = 0; j < i; ++j) {
      if (rates[i] == rates[j]) {
        fail(ErrorCode::Config, "aspp: duplicate rate " + std::to_string(rates[i]));
      }
    }
  }
  AsppModule m;
  m.channels = channels;
  m.rates = std::move(rates);
  const std::size_t reduced = channels / 4;
  m.pointwise = context_branch(t, "aspp.pointwise", channels, reduced, 1, 1, norm);
  for (std::size_t r : m.rates) {
    m.atrous.push_back(context_branch(t, "aspp.rate" + std::to_string(r), channels, reduced, 3, r, norm));
  }
  m.image_pool = context_branch(t, "aspp.image_pool", channels, reduced, 1, 1, norm);
  m.project = context_branch(t, "aspp.project", reduced * m.branch_count(), channels, 1, 1, norm);
  return m;
}

std::vector<Tensor> AsppModule::branch_outputs(LayerTable& t, const Tensor& x, bool training) const {
  const Shape s = x.shape();
  std::vector<Tensor> outs{pointwise.forward(t, x, training)};
  for (const ConvNormBranch& b : atrous) outs.push_back(b.forward(t, x, training));
  const Tensor pooled = image_pool.forward(t, adaptive_avg_pool2d(x, 1, 1), training);
  outs.push_back(upsample_bilinear(pooled, s.h, s.w));
  return outs;
}

Tensor AsppModule::forward(LayerTable& t, const Tensor& x, bool training) const {
  return project.forward(t, concat_channels(branch_outputs(t, x, training)), training);
}

}  // namespace vn
