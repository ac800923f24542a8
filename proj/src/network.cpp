#include <sstream>

#include "vn/arch.hpp"
#include "vn/error.hpp"

namespace vn {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::UNetBaseline: return "UNetBaseline";
    case Variant::BackboneFCN: return "BackboneFCN";
    case Variant::Dilated: return "Dilated";
    case Variant::UNetCDM: return "UNetCDM";
    case Variant::CIEUNet: return "CIEUNet";
  }
  return "?";
}

std::string to_string(ContextKind c) {
  switch (c) {
    case ContextKind::None: return "None";
    case ContextKind::PSP: return "PSP";
    case ContextKind::ASPP: return "ASPP";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  for (Variant v : {Variant::UNetBaseline, Variant::BackboneFCN, Variant::Dilated,
                    Variant::UNetCDM, Variant::CIEUNet}) {
    if (to_string(v) == text) return v;
  }
  fail(ErrorCode::Config, "unknown variant '" + text + "'");
}

ContextKind parse_context(const std::string& text) {
  for (ContextKind c : {ContextKind::None, ContextKind::PSP, ContextKind::ASPP}) {
    if (to_string(c) == text) return c;
  }
  fail(ErrorCode::Config, "unknown context module '" + text + "'");
}

NetworkSpec NetworkSpec::make(Variant v) {
  NetworkSpec s;
  s.variant = v;
  s.context = v == Variant::CIEUNet ? ContextKind::PSP : ContextKind::None;
  return s;
}

std::size_t NetworkSpec::output_stride() const {
  switch (variant) {
    case Variant::UNetBaseline:
    case Variant::BackboneFCN: return 16;
    case Variant::Dilated: return dilated_stride;
    case Variant::UNetCDM:
    case Variant::CIEUNet: return 4;
  }
  return 1;
}

std::size_t NetworkSpec::dilated_module_count() const {
  switch (variant) {
    case Variant::Dilated: return dilated_stride == 16 ? 1 : dilated_stride == 8 ? 2 : 3;
    case Variant::UNetCDM:
    case Variant::CIEUNet: return 3;
    default: return 0;
  }
}

std::vector<std::array<std::size_t, 3>> NetworkSpec::module_rates() const {
  std::vector<std::array<std::size_t, 3>> rates;
  for (std::size_t m = 0; m < dilated_module_count(); ++m) {
    const std::size_t base = std::size_t{2} << m;  // 2, 4, 8
    if (multigrid) {
      rates.push_back({base / 2, base, base / 2});
    } else {
      rates.push_back({base, base, base});
    }
  }
  return rates;
}

void NetworkSpec::validate() const {
  if (classes != 2) fail(ErrorCode::Config, "classes must be 2 (vessel/background)");
  if (in_channels == 0 || base_width == 0) fail(ErrorCode::Config, "zero channel width");
  if (variant == Variant::Dilated && dilated_stride != 4 && dilated_stride != 8 &&
      dilated_stride != 16) {
    fail(ErrorCode::Config, "dilated stride must be 4, 8 or 16");
  }
  if (variant == Variant::UNetBaseline && context != ContextKind::None) {
    fail(ErrorCode::Config, "invalid variant/context combination: UNetBaseline with " +
                                to_string(context));
  }
  if (context == ContextKind::PSP && psp_bins.empty()) fail(ErrorCode::Config, "no PSP bins");
  if (context == ContextKind::ASPP && aspp_rates.empty()) fail(ErrorCode::Config, "no ASPP rates");
}

namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<std::size_t> split_counts(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      fail(ErrorCode::Config, "bad count list '" + text + "'");
    }
  }
  return out;
}

std::size_t to_count(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::Config, "spec key '" + key + "' expects a count, got '" + value + "'");
  }
}

}  // namespace

std::string NetworkSpec::to_text() const {
  std::ostringstream out;
  out << "variant=" << to_string(variant) << '\n'
      << "dilated_stride=" << dilated_stride << '\n'
      << "multigrid=" << (multigrid ? 1 : 0) << '\n'
      << "norm=" << to_string(norm) << '\n'
      << "context=" << to_string(context) << '\n'
      << "in_channels=" << in_channels << '\n'
      << "base_width=" << base_width << '\n'
      << "dilated_width=" << dilated_width << '\n'
      << "classes=" << classes << '\n'
      << "psp_bins=" << join(psp_bins) << '\n'
      << "aspp_rates=" << join(aspp_rates) << '\n'
      << "init_seed=" << init_seed << '\n';
  return out.str();
}

NetworkSpec NetworkSpec::from_text(const std::string& text) {
  NetworkSpec s;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::Format, "spec line without '=': " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "variant") s.variant = parse_variant(value);
    else if (key == "dilated_stride") s.dilated_stride = to_count(key, value);
    else if (key == "multigrid") s.multigrid = to_count(key, value) != 0;
    else if (key == "norm") s.norm = parse_norm_kind(value);
    else if (key == "context") s.context = parse_context(value);
    else if (key == "in_channels") s.in_channels = to_count(key, value);
    else if (key == "base_width") s.base_width = to_count(key, value);
    else if (key == "dilated_width") s.dilated_width = to_count(key, value);
    else if (key == "classes") s.classes = to_count(key, value);
    else if (key == "psp_bins") s.psp_bins = split_counts(value);
    else if (key == "aspp_rates") s.aspp_rates = split_counts(value);
    else if (key == "init_seed") s.init_seed = to_count(key, value);
    else fail(ErrorCode::Format, "unknown spec key '" + key + "'");
  }
  s.validate();
  return s;
}

Network build_network(const NetworkSpec& spec) {
  spec.validate();
  Network net(spec);
  LayerTable& t = net.layers_;
  const std::size_t w = spec.base_width;
  const NormKind norm = spec.norm;

  std::size_t levels = 0;  // encoder resolution levels, max-pool between each
  switch (spec.variant) {
    case Variant::UNetBaseline:
    case Variant::BackboneFCN: levels = 5; break;
    case Variant::Dilated: levels = spec.dilated_stride == 16 ? 5 : spec.dilated_stride == 8 ? 4 : 3; break;
    case Variant::UNetCDM:
    case Variant::CIEUNet: levels = 3; break;
  }

  std::vector<std::size_t> widths;
  std::size_t in_c = spec.in_channels;
  for (std::size_t l = 0; l < levels; ++l) {
    widths.push_back(w << l);
    net.encoder_.push_back(ResBlock::build(t, "enc" + std::to_string(l), in_c, widths[l], 1, norm));
    in_c = widths[l];
  }

  const auto rates = spec.module_rates();
  for (std::size_t m = 0; m < rates.size(); ++m) {
    for (std::size_t b = 0; b < 3; ++b) {
      const std::string name = "dil" + std::to_string(m) + ".block" + std::to_string(b);
      net.dilated_.push_back(ResBlock::build(t, name, in_c, spec.module_width(), rates[m][b], norm));
      in_c = spec.module_width();
    }
  }

  // Context modules keep BN when the rest of the network switches to IN.
  const NormKind context_norm = norm == NormKind::Instance ? NormKind::Batch : norm;
  if (spec.context == ContextKind::PSP) {
    net.context_ = build_psp(t, in_c, context_norm, spec.psp_bins);
  } else if (spec.context == ContextKind::ASPP) {
    net.context_ = build_aspp(t, in_c, context_norm, spec.aspp_rates);
  }

  const bool decoder = spec.variant == Variant::UNetBaseline || spec.variant == Variant::UNetCDM ||
                       spec.variant == Variant::CIEUNet;
  if (decoder) {
    for (std::size_t l = levels - 1; l-- > 0;) {
      net.decoder_.push_back(
          DoubleConv::build(t, "dec" + std::to_string(l), in_c + widths[l], widths[l], norm));
      in_c = widths[l];
    }
  }
  net.classifier_ = t.add_conv("classifier", in_c, spec.classes, 1, 1, true);
  return net;
}

Tensor Network::forward(const Tensor& x, bool training, ForwardTrace* trace) {
  const Shape s = x.shape();
  if (s.c != spec_.in_channels) {
    fail(ErrorCode::Shape, "network expects " + std::to_string(spec_.in_channels) +
                               " input channels, got " + to_string(s));
  }
  const std::size_t stride = spec_.output_stride();
  if (s.h == 0 || s.w == 0 || s.h % stride != 0 || s.w % stride != 0) {
    fail(ErrorCode::Shape, "input extent " + to_string(s) + " not divisible by output stride " +
                               std::to_string(stride));
  }
  auto record = [trace](std::string label, const Tensor& t) {
    if (trace) trace->emplace_back(std::move(label), t.shape());
  };

  std::vector<Tensor> skips;
  Tensor h = x;
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    if (l > 0) h = max_pool2d(h, 2, 2);
    h = encoder_[l].forward(layers_, h, training);
    record("enc" + std::to_string(l), h);
    skips.push_back(h);
  }
  for (std::size_t b = 0; b < dilated_.size(); ++b) {
    h = dilated_[b].forward(layers_, h, training);
    if (b % 3 == 2) record("dil" + std::to_string(b / 3), h);
  }
  if (context_) {
    if (const auto* psp = std::get_if<PspModule>(&*context_)) {
      h = psp->forward(layers_, h, training, trace);
    } else {
      h = std::get<AsppModule>(*context_).forward(layers_, h, training);
    }
    record("context", h);
  }
  for (std::size_t d = 0; d < decoder_.size(); ++d) {
    const Tensor& skip = skips[skips.size() - 2 - d];
    h = upsample_bilinear(h, skip.shape().h, skip.shape().w);
    h = decoder_[d].forward(layers_, concat_channels(std::vector<Tensor>{h, skip}), training);
    record("dec" + std::to_string(skips.size() - 2 - d), h);
  }
  return classify_and_restore(h, s, trace);
}

Tensor Network::classify_and_restore(const Tensor& features, const Shape& input,
                                     ForwardTrace* trace) {
  Tensor logits = layers_.apply_conv(classifier_, features);
  if (trace) trace->emplace_back("logits_coarse", logits.shape());
  if (logits.shape().h != input.h || logits.shape().w != input.w) {
    logits = upsample_bilinear(logits, input.h, input.w);
  }
  if (trace) trace->emplace_back("logits", logits.shape());
  return logits;
}

void Network::zero_grad() {
  for (Tensor& p : parameters()) p.zero_grad();
}

LayerReport layer_report(const Network& net) {
  LayerReport r;
  r.conv_count = net.layers().conv_count();
  r.norm_count = net.layers().norm_count();
  for (const Tensor& p : net.parameters()) r.param_count += p.numel();
  return r;
}

}  // namespace vn
