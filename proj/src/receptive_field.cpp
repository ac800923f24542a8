#include <algorithm>
#include <cctype>

#include "vn/arch.hpp"
#include "vn/error.hpp"

namespace vn {

bool ReceptiveFieldMask::at(std::ptrdiff_t dy, std::ptrdiff_t dx) const {
  if (dy < -radius || dy > radius || dx < -radius || dx > radius) return false;
  return cells[static_cast<std::size_t>((dy + radius) * (2 * radius + 1) + dx + radius)] != 0;
}

ReceptiveFieldMask receptive_field_mask(std::span<const RfLayer> stack) {
  if (stack.empty()) fail(ErrorCode::Argument, "receptive field: empty layer stack");
  for (const RfLayer& l : stack) {
    if (l.kernel % 2 == 0 || l.stride == 0 || l.dilation == 0) {
      fail(ErrorCode::Argument, "receptive field: kernel must be odd, stride and dilation >= 1");
    }
  }

  // Walk from the output back to the input. An offset p at a layer's output
  // reaches p*stride + (u - k/2)*dilation at its input.
  std::ptrdiff_t radius = 0;
  std::vector<std::uint8_t> cur{1};
  for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
    const auto s = static_cast<std::ptrdiff_t>(it->stride);
    const auto r = static_cast<std::ptrdiff_t>(it->dilation);
    const auto half = static_cast<std::ptrdiff_t>(it->kernel / 2);
    const std::ptrdiff_t next_radius = radius * s + half * r;
    const std::ptrdiff_t side = 2 * radius + 1;
    const std::ptrdiff_t next_side = 2 * next_radius + 1;
    std::vector<std::uint8_t> next(static_cast<std::size_t>(next_side * next_side), 0);
    for (std::ptrdiff_t y = -radius; y <= radius; ++y) {
      for (std::ptrdiff_t x = -radius; x <= radius; ++x) {
        if (!cur[static_cast<std::size_t>((y + radius) * side + x + radius)]) continue;
        for (std::ptrdiff_t u = -half; u <= half; ++u) {
          const std::ptrdiff_t ny = y * s + u * r + next_radius;
          for (std::ptrdiff_t v = -half; v <= half; ++v) {
            const std::ptrdiff_t nx = x * s + v * r + next_radius;
            next[static_cast<std::size_t>(ny * next_side + nx)] = 1;
          }
        }
      }
    }
    cur = std::move(next);
    radius = next_radius;
  }

  ReceptiveFieldMask m;
  m.radius = radius;
  m.cells = std::move(cur);
  const std::ptrdiff_t side = 2 * radius + 1;
  std::ptrdiff_t y0 = side, y1 = -1, x0 = side, x1 = -1;
  for (std::ptrdiff_t y = 0; y < side; ++y) {
    for (std::ptrdiff_t x = 0; x < side; ++x) {
      if (!m.cells[static_cast<std::size_t>(y * side + x)]) continue;
      ++m.reachable;
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
    }
  }
  m.bbox_h = static_cast<std::size_t>(y1 - y0 + 1);
  m.bbox_w = static_cast<std::size_t>(x1 - x0 + 1);
  m.density = static_cast<double>(m.reachable) / static_cast<double>(m.bbox_h * m.bbox_w);
  return m;
}

std::vector<RfLayer> dilated_stack(std::span<const std::array<std::size_t, 3>> triples,
                                   std::size_t per_block) {
  std::vector<RfLayer> out;
  for (const auto& t : triples) {
    for (std::size_t rate : t) {
      for (std::size_t i = 0; i < per_block; ++i) out.push_back({3, 1, rate});
    }
  }
  return out;
}

std::vector<std::array<std::size_t, 3>> parse_rate_schedule(const std::string& text) {
  std::string compact;
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) compact += ch;
  }
  auto bad = [&]() -> void {
    fail(ErrorCode::Argument, "rate schedule '" + text + "' must look like (1,2,1),(2,4,2)");
  };
  std::vector<std::array<std::size_t, 3>> out;
  std::size_t pos = 0;
  while (pos < compact.size()) {
    if (!out.empty()) {
      if (compact[pos] != ',') bad();
      ++pos;
    }
    if (pos >= compact.size() || compact[pos] != '(') bad();
    const std::size_t close = compact.find(')', pos);
    if (close == std::string::npos) bad();
    const std::string body = compact.substr(pos + 1, close - pos - 1);
    std::array<std::size_t, 3> triple{};
    std::size_t k = 0, start = 0;
    while (true) {
      const std::size_t comma = body.find(',', start);
      const std::string item = body.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (k >= 3 || item.empty() || !std::all_of(item.begin(), item.end(), ::isdigit)) bad();
      triple[k++] = std::stoul(item);
      if (triple[k - 1] == 0) bad();
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (k != 3) bad();
    out.push_back(triple);
    pos = close + 1;
  }
  if (out.empty()) bad();
  return out;
}

}  // namespace vn
