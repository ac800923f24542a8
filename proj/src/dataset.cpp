#include "vn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "vn/error.hpp"
#include "vn/pnm.hpp"

namespace fs = std::filesystem;

namespace vn {

Image label_from_pgm(const Image& raw, const std::string& source, std::size_t data_offset) {
  if (raw.channels != 1) fail(ErrorCode::Format, source + ": label must be a P5 (gray) image");
  Image mask = raw;
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
    const std::uint8_t v = mask.pixels[i];
    if (v != 0 && v != 255) {
      fail(ErrorCode::Format, source + ": label value " + std::to_string(v) + " at byte offset " +
                                  std::to_string(data_offset + i) + " (pixel " +
                                  std::to_string(i % raw.width) + "," + std::to_string(i / raw.width) +
                                  "); labels must be 0 or 255");
    }
    mask.pixels[i] = v ? 1 : 0;
  }
  return mask;
}

Image label_to_pgm(const Image& mask) {
  Image out = mask;
  for (auto& v : out.pixels) v = v ? 255 : 0;
  return out;
}

namespace {

Image load_binary(const fs::path& path, const Image& image, const char* what) {
  std::size_t offset = 0;
  const Image raw = load_pnm(path.string(), &offset);
  if (raw.width != image.width || raw.height != image.height) {
    fail(ErrorCode::Format, path.string() + ": " + what + " is " + std::to_string(raw.width) + "x" +
                                std::to_string(raw.height) + ", image is " +
                                std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  return label_from_pgm(raw, path.string(), offset);
}

}  // namespace

std::vector<Sample> load_dataset(const std::string& root) {
  const fs::path images = fs::path(root) / "images";
  const fs::path labels = fs::path(root) / "labels";
  const fs::path fov = fs::path(root) / "fov";
  if (!fs::is_directory(images)) fail(ErrorCode::Io, "dataset '" + root + "' has no images/ directory");
  if (!fs::is_directory(labels)) fail(ErrorCode::Io, "dataset '" + root + "' has no labels/ directory");
  const bool has_fov = fs::is_directory(fov);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(images)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorCode::Data, "dataset '" + root + "' contains no .ppm images");

  std::vector<Sample> out;
  for (const fs::path& file : files) {
    Sample s;
    s.name = file.stem().string();
    s.image = load_pnm(file.string());
    if (s.image.channels != 3) fail(ErrorCode::Format, file.string() + ": expected a P6 (RGB) image");
    const fs::path label = labels / (s.name + ".pgm");
    if (!fs::exists(label)) fail(ErrorCode::Io, "missing label " + label.string());
    s.mask = load_binary(label, s.image, "label");
    if (has_fov) {
      const fs::path f = fov / (s.name + ".pgm");
      if (!fs::exists(f)) fail(ErrorCode::Io, "missing fov mask " + f.string());
      s.fov = load_binary(f, s.image, "fov mask");
    }
    out.push_back(std::move(s));
  }
  return out;
}

void save_dataset(const std::string& root, std::span<const Sample> samples) {
  const fs::path base(root);
  fs::create_directories(base / "images");
  fs::create_directories(base / "labels");
  for (const Sample& s : samples) {
    save_pnm((base / "images" / (s.name + ".ppm")).string(), s.image);
    save_pnm((base / "labels" / (s.name + ".pgm")).string(), label_to_pgm(s.mask));
    if (!s.fov.empty()) {
      fs::create_directories(base / "fov");
      save_pnm((base / "fov" / (s.name + ".pgm")).string(), label_to_pgm(s.fov));
    }
  }
}

void save_mask(std::span<const double> prob, std::size_t height, std::size_t width,
               const std::string& path, double threshold) {
  if (prob.size() != height * width) fail(ErrorCode::Shape, "mask extent mismatch");
  Image img = Image::blank(1, height, width);
  for (std::size_t i = 0; i < prob.size(); ++i) img.pixels[i] = prob[i] >= threshold ? 255 : 0;
  save_pnm(path, img);
}

void save_probability(std::span<const double> prob, std::size_t height, std::size_t width,
                      const std::string& path) {
  if (prob.size() != height * width) fail(ErrorCode::Shape, "probability map extent mismatch");
  Image img = Image::blank(1, height, width);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(prob[i], 0.0, 1.0) * 255.0));
  }
  save_pnm(path, img);
}

}  // namespace vn
