#include "vn/pnm.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>

#include "vn/error.hpp"

namespace vn {

namespace {

class HeaderReader {
 public:
  HeaderReader(std::istream& in, const std::string& source) : in_(in), source_(source) {}

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::Format, source_ + ": " + what + " at byte " + std::to_string(offset_));
  }

  int get() {
    const int ch = in_.get();
    if (ch != std::char_traits<char>::eof()) ++offset_;
    return ch;
  }

  void skip_space_and_comments() {
    while (true) {
      const int ch = in_.peek();
      if (ch == '#') {
        while (true) {
          const int c = get();
          if (c == '\n' || c == std::char_traits<char>::eof()) break;
        }
      } else if (ch != std::char_traits<char>::eof() && std::isspace(ch)) {
        get();
      } else {
        return;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (std::isdigit(in_.peek())) {
      value = value * 10 + static_cast<std::size_t>(get() - '0');
      if (++digits > 9) error(std::string("oversized ") + what);
    }
    if (digits == 0) error(std::string("expected ") + what);
    return value;
  }

  std::size_t offset() const { return offset_; }

 private:
  std::istream& in_;
  const std::string& source_;
  std::size_t offset_ = 0;
};

}  // namespace

Image read_pnm(std::istream& in, const std::string& source, std::size_t* data_offset) {
  HeaderReader r(in, source);
  const int p = r.get();
  const int kind = r.get();
  if (p != 'P' || (kind != '5' && kind != '6')) r.error("not a binary PGM/PPM (expected P5 or P6)");
  Image img;
  img.channels = kind == '6' ? 3 : 1;
  img.width = r.number("width");
  img.height = r.number("height");
  const std::size_t maxval = r.number("maxval");
  if (img.width == 0 || img.height == 0) r.error("zero image extent");
  if (maxval == 0 || maxval > 255) r.error("unsupported maxval " + std::to_string(maxval));
  if (!std::isspace(r.get())) r.error("missing whitespace after header");

  const std::size_t header = r.offset();
  if (data_offset) *data_offset = header;
  std::vector<std::uint8_t> interleaved(img.channels * img.height * img.width);
  in.read(reinterpret_cast<char*>(interleaved.data()), static_cast<std::streamsize>(interleaved.size()));
  if (static_cast<std::size_t>(in.gcount()) != interleaved.size()) {
    fail(ErrorCode::Format, source + ": truncated pixel data, expected " +
                                std::to_string(interleaved.size()) + " bytes after offset " +
                                std::to_string(header));
  }
  img.pixels.resize(interleaved.size());
  const std::size_t plane = img.plane();
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < img.channels; ++c) {
      const std::uint8_t v = interleaved[i * img.channels + c];
      if (v > maxval) {
        fail(ErrorCode::Format, source + ": sample " + std::to_string(v) + " exceeds maxval at byte " +
                                    std::to_string(header + i * img.channels + c));
      }
      img.pixels[c * plane + i] = v;
    }
  }
  return img;
}

void write_pnm(std::ostream& out, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    fail(ErrorCode::Argument, "PNM holds 1 or 3 channels, got " + std::to_string(image.channels));
  }
  out << (image.channels == 3 ? "P6" : "P5") << '\n'
      << image.width << ' ' << image.height << "\n255\n";
  const std::size_t plane = image.plane();
  std::vector<std::uint8_t> interleaved(image.pixels.size());
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < image.channels; ++c) {
      interleaved[i * image.channels + c] = image.pixels[c * plane + i];
    }
  }
  out.write(reinterpret_cast<const char*>(interleaved.data()),
            static_cast<std::streamsize>(interleaved.size()));
}

Image load_pnm(const std::string& path, std::size_t* data_offset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  return read_pnm(in, path, data_offset);
}

void save_pnm(const std::string& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot open '" + path + "' for writing");
  write_pnm(out, image);
  if (!out) fail(ErrorCode::Io, "write to '" + path + "' failed");
}

}  // namespace vn
