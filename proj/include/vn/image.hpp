#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace vn {

/// 8-bit raster stored channel-planar: pixels[(c * height + y) * width + x].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  static Image blank(std::size_t channels, std::size_t height, std::size_t width,
                     std::uint8_t value = 0) {
    return {channels, height, width,
            std::vector<std::uint8_t>(channels * height * width, value)};
  }

  bool empty() const { return pixels.empty(); }
  std::size_t plane() const { return height * width; }
  std::uint8_t& at(std::size_t c, std::size_t y, std::size_t x) {
    return pixels[(c * height + y) * width + x];
  }
  std::uint8_t at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }
  bool operator==(const Image&) const = default;
};

/// One dataset entry. `mask` holds 0/1 per pixel; `fov` is empty when the
/// dataset has no field-of-view masks, otherwise nonzero marks evaluated pixels.
struct Sample {
  std::string name;
  Image image;
  Image mask;
  Image fov;
};

}  // namespace vn
