#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bevloc {

/// Error categories shared by every module. The CLI maps each one to a
/// distinct exit code, so keep the numbering stable.
enum class Errc {
  kInvalidArgument = 1,
  kInvalidSpec,
  kShapeMismatch,
  kIo,
  kMagicMismatch,
  kMalformedHeader,
  kTruncated,
  kUnknownEncoder,
  kTemplateTooLarge,
  kMissingHeading,
  kEmptyInput,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kInvalidArgument: return "invalid_argument";
    case Errc::kInvalidSpec: return "invalid_spec";
    case Errc::kShapeMismatch: return "shape_mismatch";
    case Errc::kIo: return "io";
    case Errc::kMagicMismatch: return "magic_mismatch";
    case Errc::kMalformedHeader: return "malformed_header";
    case Errc::kTruncated: return "truncated";
    case Errc::kUnknownEncoder: return "unknown_encoder";
    case Errc::kTemplateTooLarge: return "template_too_large";
    case Errc::kMissingHeading: return "missing_heading";
    case Errc::kEmptyInput: return "empty_input";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace bevloc
