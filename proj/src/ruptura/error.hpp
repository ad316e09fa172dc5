#pragma once

#include <stdexcept>
#include <string>

namespace ruptura {

enum class ErrorCode {
  Io = 1,
  Parse,
  Validation,
  Dimension,
  InsufficientData,
  Degenerate,
  Layout,
  Config,
  MissingExog,
  MissingCovariate,
  InvalidArgument,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class Segment { Before, After };

class InsufficientDataError : public Error {
 public:
  InsufficientDataError(Segment segment, const std::string& what)
      : Error(ErrorCode::InsufficientData, what), segment_(segment) {}
  Segment segment() const noexcept { return segment_; }

 private:
  Segment segment_;
};

// Warnings go to stderr unless silenced; tests silence them.
void log_warning(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace ruptura
