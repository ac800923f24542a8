#pragma once

#include <iosfwd>
#include <string>

#include "vn/image.hpp"

namespace vn {

/// Binary PNM: P6 (RGB) and P5 (gray), maxval up to 255. `source` names the
/// stream in error messages; `data_offset` receives the header length.
Image read_pnm(std::istream& in, const std::string& source = "<stream>",
               std::size_t* data_offset = nullptr);
void write_pnm(std::ostream& out, const Image& image);

Image load_pnm(const std::string& path, std::size_t* data_offset = nullptr);
void save_pnm(const std::string& path, const Image& image);

}  // namespace vn
