#pragma once

#include <cstdint>
#include <iosfwd>

#include "vn/tensor.hpp"

namespace vn {

/// VNT1 blob: "VNT1", four u64 LE shape fields (n, c, h, w), then n*c*h*w
/// IEEE-754 doubles, little endian.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void write_u64(std::ostream& out, std::uint64_t v);
std::uint64_t read_u64(std::istream& in);

}  // namespace vn
