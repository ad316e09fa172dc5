#include "ruptura/error.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace ruptura {

namespace {
std::atomic<bool> g_warnings{true};
std::mutex g_warn_mutex;
}  // namespace

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Dimension: return "dimension";
    case ErrorCode::InsufficientData: return "insufficient_data";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::Layout: return "layout";
    case ErrorCode::Config: return "config";
    case ErrorCode::MissingExog: return "missing_exog";
    case ErrorCode::MissingCovariate: return "missing_covariate";
    case ErrorCode::InvalidArgument: return "invalid_argument";
  }
  return "unknown";
}

void log_warning(const std::string& message) {
  if (!g_warnings.load(std::memory_order_relaxed)) return;
  std::lock_guard<std::mutex> lock(g_warn_mutex);
  std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings.store(enabled); }

}  // namespace ruptura
