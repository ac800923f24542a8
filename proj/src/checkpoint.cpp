#include <fstream>

#include "vn/arch.hpp"
#include "vn/error.hpp"
#include "vn/serialize.hpp"

namespace vn {

namespace {

constexpr char kMagic[4] = {'V', 'N', 'C', 'K'};

void load_into(Tensor& dst, std::istream& in, const std::string& what) {
  const Tensor src = read_tensor(in);
  if (!(src.shape() == dst.shape())) {
    fail(ErrorCode::Format, "checkpoint: " + what + " has shape " + to_string(src.shape()) +
                                ", network expects " + to_string(dst.shape()));
  }
  std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
}

void load_stats(std::vector<double>& dst, std::istream& in, const std::string& what) {
  const Tensor src = read_tensor(in);
  if (src.numel() != dst.size()) {
    fail(ErrorCode::Format, "checkpoint: " + what + " has " + std::to_string(src.numel()) +
                                " entries, network expects " + std::to_string(dst.size()));
  }
  dst.assign(src.data().begin(), src.data().end());
}

}  // namespace

void write_checkpoint(std::ostream& out, const Network& net) {
  const std::string text = net.spec().to_text();
  out.write(kMagic, 4);
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const LayerTable& t = net.layers();
  for (const LayerRef& ref : t.order()) {
    if (ref.kind == LayerKind::Conv) {
      const ConvParams& p = t.conv(ref.index).params;
      write_tensor(out, p.weight);
      if (p.bias.defined()) write_tensor(out, p.bias);
    } else {
      const NormState& s = t.norm(ref.index).state;
      write_tensor(out, s.gamma);
      write_tensor(out, s.beta);
      if (s.kind == NormKind::Batch) {
        const std::size_t c = s.running_mean.size();
        write_tensor(out, Tensor::from({1, c, 1, 1}, s.running_mean));
        write_tensor(out, Tensor::from({1, c, 1, 1}, s.running_var));
      }
    }
  }
  if (!out) fail(ErrorCode::Io, "checkpoint: write failed");
}

Network read_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic)) fail(ErrorCode::Format, "checkpoint: bad magic");
  const std::uint64_t length = read_u64(in);
  if (length > (1u << 20)) fail(ErrorCode::Format, "checkpoint: implausible spec length");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) fail(ErrorCode::Format, "checkpoint: truncated spec block");

  Network net = build_network(NetworkSpec::from_text(text));
  LayerTable& t = net.layers();
  for (const LayerRef& ref : t.order()) {
    if (ref.kind == LayerKind::Conv) {
      ConvLayer& c = t.conv(ref.index);
      load_into(c.params.weight, in, c.name + ".weight");
      if (c.params.bias.defined()) load_into(c.params.bias, in, c.name + ".bias");
    } else {
      NormLayer& n = t.norm(ref.index);
      load_into(n.state.gamma, in, n.name + ".gamma");
      load_into(n.state.beta, in, n.name + ".beta");
      if (n.state.kind == NormKind::Batch) {
        load_stats(n.state.running_mean, in, n.name + ".running_mean");
        load_stats(n.state.running_var, in, n.name + ".running_var");
      }
    }
  }
  return net;
}

void save_checkpoint(const std::string& path, const Network& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot open '" + path + "' for writing");
  write_checkpoint(out, net);
}

Network load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace vn
