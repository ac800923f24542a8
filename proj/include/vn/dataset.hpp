#pragma once

#include <span>
#include <string>
#include <vector>

#include "vn/image.hpp"

namespace vn {

/// Reads root/images/*.ppm with labels/<stem>.pgm (0 or 255) and, when the
/// directory exists, fov/<stem>.pgm. Samples come back sorted by stem.
std::vector<Sample> load_dataset(const std::string& root);

/// Inverse of load_dataset; creates the directories as needed.
void save_dataset(const std::string& root, std::span<const Sample> samples);

/// Converts a 0/255 label raster to 0/1, rejecting any other value.
Image label_from_pgm(const Image& raw, const std::string& source, std::size_t data_offset = 0);
Image label_to_pgm(const Image& mask);

/// prob >= threshold becomes 255, else 0.
void save_mask(std::span<const double> prob, std::size_t height, std::size_t width,
               const std::string& path, double threshold = 0.5);
/// Linear 0..255 quantization of [0, 1].
void save_probability(std::span<const double> prob, std::size_t height, std::size_t width,
                      const std::string& path);

}  // namespace vn
