#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vtgrasp {

enum class ErrorCode {
  structural,          // shape/dimension mismatch, malformed image data
  invalid_config,      // bad parameters, missing provider
  provider_failure,    // a score provider could not answer
  invalid_depth,       // depth return of 0
  empty_cloud,         // no valid points left after segmentation
  object_too_wide,     // grasp pair exceeds the gripper span
  degenerate_geometry, // cloud moments of rank < 2
  undefined_metric,    // AP without ground truth, accuracy of all-zero counts
  usage,               // API misuse (e.g. mixing boxes and masks)
  parse,               // malformed input file
  io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::structural: return "structural";
    case ErrorCode::invalid_config: return "invalid_config";
    case ErrorCode::provider_failure: return "provider_failure";
    case ErrorCode::invalid_depth: return "invalid_depth";
    case ErrorCode::empty_cloud: return "empty_cloud";
    case ErrorCode::object_too_wide: return "object_too_wide";
    case ErrorCode::degenerate_geometry: return "degenerate_geometry";
    case ErrorCode::undefined_metric: return "undefined_metric";
    case ErrorCode::usage: return "usage";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vtgrasp
