#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blm {

// Coarse failure classes. The CLI prints the category name as the first
// token of its one-line error report.
enum class ErrorCategory {
  kUsage,     // bad flag or option value
  kNotFound,  // missing input file
  kFormat,    // malformed file contents
  kData,      // semantically invalid data (bad lexicon, missing ids, ...)
  kShape,     // dimension mismatch
  kNumeric,   // NaN/Inf during training
  kIo,        // write failures
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kUsage: return "usage";
    case ErrorCategory::kNotFound: return "not-found";
    case ErrorCategory::kFormat: return "format";
    case ErrorCategory::kData: return "data";
    case ErrorCategory::kShape: return "shape";
    case ErrorCategory::kNumeric: return "numeric";
    case ErrorCategory::kIo: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what) {
  throw Error(c, what);
}

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCategory::kShape, what);
}

}  // namespace blm
