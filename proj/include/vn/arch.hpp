#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vn/norm.hpp"
#include "vn/ops.hpp"
#include "vn/rng.hpp"
#include "vn/tensor.hpp"

namespace vn {

enum class Variant { UNetBaseline, BackboneFCN, Dilated, UNetCDM, CIEUNet };
enum class ContextKind { None, PSP, ASPP };

std::string to_string(Variant v);
std::string to_string(ContextKind c);
Variant parse_variant(const std::string& text);
ContextKind parse_context(const std::string& text);

/// Declarative model description. Serialized verbatim into checkpoints.
struct NetworkSpec {
  Variant variant = Variant::CIEUNet;
  std::size_t dilated_stride = 4;  // Dilated only: 16, 8 or 4
  bool multigrid = true;           // rate triples (1,2,1)x base instead of (1,1,1)x base
  NormKind norm = NormKind::Batch;
  ContextKind context = ContextKind::PSP;
  std::size_t in_channels = 3;
  std::size_t base_width = 32;
  std::size_t dilated_width = 0;  // 0 selects 4 * base_width
  std::size_t classes = 2;
  std::vector<std::size_t> psp_bins{1, 2, 3, 6};
  std::vector<std::size_t> aspp_rates{6, 12, 18};
  std::uint64_t init_seed = 0;

  /// Conventional spec for a variant: CIEU-Net gets PSP, the rest no context.
  static NetworkSpec make(Variant v);

  std::size_t module_width() const { return dilated_width ? dilated_width : 4 * base_width; }
  /// Input extents must be divisible by this.
  std::size_t output_stride() const;
  std::size_t dilated_module_count() const;
  std::vector<std::array<std::size_t, 3>> module_rates() const;

  void validate() const;
  std::string to_text() const;
  static NetworkSpec from_text(const std::string& text);
};

struct ConvLayer {
  std::string name;
  ConvParams params;
  bool in_context = false;
};

struct NormLayer {
  std::string name;
  NormState state;
  bool in_context = false;
};

enum class LayerKind { Conv, Norm };

struct LayerRef {
  LayerKind kind;
  std::size_t index;
};

/// Owns every conv and norm of a model in construction order. Blocks refer
/// to their layers by index.
class LayerTable {
 public:
  explicit LayerTable(std::uint64_t init_seed = 0) : rng_(init_seed) {}

  /// He-normal weights (variance 2 / fan_in), zero bias. Padding keeps the
  /// spatial size for stride 1.
  std::size_t add_conv(std::string name, std::size_t in_c, std::size_t out_c, std::size_t kernel,
                       std::size_t dilation = 1, bool bias = false, bool in_context = false);
  std::size_t add_norm(std::string name, NormKind kind, std::size_t channels,
                       bool in_context = false);

  ConvLayer& conv(std::size_t i) { return convs_[i]; }
  const ConvLayer& conv(std::size_t i) const { return convs_[i]; }
  NormLayer& norm(std::size_t i) { return norms_[i]; }
  const NormLayer& norm(std::size_t i) const { return norms_[i]; }

  Tensor apply_conv(std::size_t i, const Tensor& x) const { return conv2d(x, convs_[i].params); }
  Tensor apply_norm(std::size_t i, const Tensor& x, bool training) {
    return normalize(x, norms_[i].state, training);
  }

  const std::vector<LayerRef>& order() const { return order_; }
  std::size_t conv_count() const { return convs_.size(); }
  std::size_t norm_count() const { return norms_.size(); }
  const std::vector<NormLayer>& norms() const { return norms_; }

  /// Learnable tensors in layer order: conv weight [, bias]; norm gamma, beta.
  std::vector<Tensor> parameters() const;
  /// Conv weights only; the target of weight decay.
  std::vector<Tensor> conv_weights() const;

 private:
  std::vector<ConvLayer> convs_;
  std::vector<NormLayer> norms_;
  std::vector<LayerRef> order_;
  Rng rng_;
};

/// Ordered (label, shape) record of intermediate feature maps.
using ForwardTrace = std::vector<std::pair<std::string, Shape>>;

/// conv3x3(rate) -> norm -> relu -> conv3x3(rate) -> norm, plus shortcut, relu.
/// The shortcut is a 1x1 conv + norm when channel counts differ.
struct ResBlock {
  std::size_t conv_a, norm_a, conv_b, norm_b;
  std::optional<std::pair<std::size_t, std::size_t>> projection;
  std::size_t rate = 1;

  static ResBlock build(LayerTable& t, const std::string& name, std::size_t in_c,
                        std::size_t out_c, std::size_t rate, NormKind norm);
  Tensor forward(LayerTable& t, const Tensor& x, bool training) const;
};

/// Decoder stage: (conv3x3 -> norm -> relu) twice.
struct DoubleConv {
  std::size_t conv_a, norm_a, conv_b, norm_b;

  static DoubleConv build(LayerTable& t, const std::string& name, std::size_t in_c,
                          std::size_t out_c, NormKind norm);
  Tensor forward(LayerTable& t, const Tensor& x, bool training) const;
};

struct ConvNormBranch {
  std::size_t conv, norm;
  Tensor forward(LayerTable& t, const Tensor& x, bool training) const;
};

/// Pyramid pooling: adaptive average pools at each bin size, each projected
/// to channels/4, upsampled back, concatenated with the input and fused by a
/// 3x3 conv to the input channel count.
struct PspModule {
  std::vector<std::size_t> bins;
  std::vector<ConvNormBranch> branches;
  ConvNormBranch fuse;
  std::size_t channels = 0;

  std::vector<Tensor> branch_outputs(LayerTable& t, const Tensor& x, bool training,
                                     ForwardTrace* trace = nullptr) const;
  Tensor forward(LayerTable& t, const Tensor& x, bool training,
                 ForwardTrace* trace = nullptr) const;
};

/// Atrous spatial pyramid: a 1x1 branch, one dilated 3x3 branch per rate and
/// a global-pool branch, concatenated and projected by a 1x1 conv.
struct AsppModule {
  std::vector<std::size_t> rates;
  ConvNormBranch pointwise;
  std::vector<ConvNormBranch> atrous;
  ConvNormBranch image_pool;
  ConvNormBranch project;
  std::size_t channels = 0;

  std::size_t branch_count() const { return atrous.size() + 2; }
  std::vector<Tensor> branch_outputs(LayerTable& t, const Tensor& x, bool training) const;
  Tensor forward(LayerTable& t, const Tensor& x, bool training) const;
};

using ContextModule = std::variant<PspModule, AsppModule>;

PspModule build_psp(LayerTable& t, std::size_t channels, NormKind norm,
                    std::vector<std::size_t> bins = {1, 2, 3, 6});
AsppModule build_aspp(LayerTable& t, std::size_t channels, NormKind norm,
                      std::vector<std::size_t> rates = {6, 12, 18});

struct LayerReport {
  std::size_t conv_count = 0;
  std::size_t norm_count = 0;
  std::size_t param_count = 0;
};

class Network {
 public:
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const NetworkSpec& spec() const { return spec_; }
  LayerTable& layers() { return layers_; }
  const LayerTable& layers() const { return layers_; }

  /// Logits (n, classes, h, w). `training` selects batch statistics for BN.
  Tensor forward(const Tensor& x, bool training, ForwardTrace* trace = nullptr);

  std::vector<Tensor> parameters() const { return layers_.parameters(); }
  std::vector<Tensor> conv_weights() const { return layers_.conv_weights(); }
  void zero_grad();

  const std::optional<ContextModule>& context() const { return context_; }

 private:
  explicit Network(NetworkSpec spec) : spec_(std::move(spec)), layers_(spec_.init_seed) {}

  Tensor classify_and_restore(const Tensor& features, const Shape& input, ForwardTrace* trace);

  NetworkSpec spec_;
  LayerTable layers_;
  std::vector<ResBlock> encoder_;  // one per resolution level, max-pool between
  std::vector<ResBlock> dilated_;  // three per module
  std::optional<ContextModule> context_;
  std::vector<DoubleConv> decoder_;  // coarse to fine
  std::size_t classifier_ = 0;

  friend Network build_network(const NetworkSpec& spec);
};

Network build_network(const NetworkSpec& spec);

LayerReport layer_report(const Network& net);

// ---------------------------------------------------------------------------
// Receptive fields

struct RfLayer {
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t dilation = 1;
};

/// Exact set of input offsets that influence one output position.
struct ReceptiveFieldMask {
  std::ptrdiff_t radius = 0;         // cells span [-radius, radius] on each axis
  std::vector<std::uint8_t> cells;   // (2*radius+1)^2, row-major
  std::size_t reachable = 0;
  std::size_t bbox_h = 0;
  std::size_t bbox_w = 0;
  double density = 0.0;              // reachable / (bbox_h * bbox_w)

  std::size_t side() const { return static_cast<std::size_t>(2 * radius + 1); }
  bool at(std::ptrdiff_t dy, std::ptrdiff_t dx) const;
};

ReceptiveFieldMask receptive_field_mask(std::span<const RfLayer> stack);

/// One 3x3 stride-1 layer per rate, `per_block` layers per listed rate.
std::vector<RfLayer> dilated_stack(std::span<const std::array<std::size_t, 3>> triples,
                                   std::size_t per_block = 1);

/// Parses "(1,2,1),(2,4,2)" into rate triples.
std::vector<std::array<std::size_t, 3>> parse_rate_schedule(const std::string& text);

// ---------------------------------------------------------------------------
// Checkpoints: "VNCK", u64 LE spec-text length, spec text, then every conv
// (weight, bias) and norm (gamma, beta, running mean/var for BN) as VNT1
// tensors in layer order.

void write_checkpoint(std::ostream& out, const Network& net);
Network read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Network& net);
Network load_checkpoint(const std::string& path);

}  // namespace vn
