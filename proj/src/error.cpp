#include "wbsr/error.hpp"

namespace wbsr {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::empty_input: return "empty_input";
    case ErrorKind::invariant: return "invariant";
    case ErrorKind::profile: return "profile";
    case ErrorKind::io: return "io";
    case ErrorKind::datatype_mismatch: return "datatype_mismatch";
    case ErrorKind::truncated_data: return "truncated_data";
    case ErrorKind::malformed_metadata: return "malformed_metadata";
    case ErrorKind::geometry_mismatch: return "geometry_mismatch";
  }
  return "unknown";
}

}  // namespace wbsr
