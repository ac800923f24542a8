#include "vn/error.hpp"

namespace vn {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Shape: return "shape";
    case ErrorCode::Argument: return "argument";
    case ErrorCode::Graph: return "graph";
    case ErrorCode::Config: return "config";
    case ErrorCode::Io: return "io";
    case ErrorCode::Format: return "format";
    case ErrorCode::Data: return "data";
    case ErrorCode::Numeric: return "numeric";
  }
  return "unknown";
}

}  // namespace vn
