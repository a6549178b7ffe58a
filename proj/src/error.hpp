#pragma once

#include <stdexcept>
#include <string>

namespace sketchrod {

enum class ErrorCode {
  InvalidArgument,
  Io,
  Format,
  Validation,
  Bounds,
  StrokeInvalid,
  PartialExtraction,
  Degenerate,
  BindingInvalid,
  Diverged,
  NotReady,
  Protocol,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sketchrod
