#pragma once

#include <stdexcept>
#include <string>

namespace wbsr {

enum class ErrorKind {
  parameter,
  empty_input,
  invariant,
  profile,
  io,
  datatype_mismatch,
  truncated_data,
  malformed_metadata,
  geometry_mismatch,
};

const char* to_string(ErrorKind kind) noexcept;

/// All library failures are reported through this type; `kind()` lets
/// callers branch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace wbsr
