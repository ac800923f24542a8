#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vn {

enum class ErrorCode {
  Shape,       // incompatible tensor shapes or extents
  Argument,    // invalid scalar argument (dilation, pool size, ...)
  Graph,       // autograd misuse: cycle, non-scalar loss
  Config,      // bad network spec or run configuration
  Io,          // file missing or unreadable
  Format,      // malformed PNM header, bad magic, corrupt payload
  Data,        // values outside their domain (label 128, mask 2)
  Numeric,     // NaN/Inf encountered during training
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace vn
