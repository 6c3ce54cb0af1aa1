#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace topotext {

enum class ErrorKind {
  InvalidInput,
  ShapeMismatch,
  UnstableShape,
  NoValidShape,
  InvalidLabel,
  InvalidParams,
  MappingError,
  InvalidPlan,
  DegenerateData,
  UndefinedGain,
  FormatError,
  CorruptFile,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace topotext
