#include "vn/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "vn/error.hpp"

namespace vn {

namespace {
constexpr std::array<char, 4> kMagic{'V', 'N', 'T', '1'};
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;
}  // namespace

void write_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

std::uint64_t read_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    fail(ErrorCode::Format, "truncated stream while reading u64");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes[i]} << (8 * i);
  return v;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write(kMagic.data(), kMagic.size());
  const Shape& s = t.shape();
  for (std::uint64_t d : {s.n, s.c, s.h, s.w}) write_u64(out, d);
  for (double v : t.data()) write_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) fail(ErrorCode::Io, "failed writing tensor");
}

Tensor read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    fail(ErrorCode::Format, "bad tensor magic (expected VNT1)");
  }
  Shape s;
  s.n = read_u64(in);
  s.c = read_u64(in);
  s.h = read_u64(in);
  s.w = read_u64(in);
  const std::uint64_t count = s.n * s.c * s.h * s.w;
  if (count > kMaxElements) fail(ErrorCode::Format, "tensor too large: " + to_string(s));
  std::vector<double> values(count);
  for (auto& v : values) v = std::bit_cast<double>(read_u64(in));
  return Tensor::from(s, std::move(values));
}

}  // namespace vn
