#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geobridge {

/// Failure categories raised by the library. Each maps to one documented
/// error condition of an operation.
enum class Errc {
  InvalidArgument,
  SingularTransform,
  PolarDegenerate,
  DecodeError,
  EncodeError,
  OutOfBounds,
  WindowTooLarge,
  ImageTooSmall,
  ProviderError,
  OutOfCoverage,
  ZeroVector,
  DimensionMismatch,
  KOutOfRange,
  BadTarget,
  BatchMisaligned,
  NonFiniteGradient,
  Diverged,
  MissingFootprint,
  MissingLocation,
  EmptyQuerySet,
  FormatError,
  IoError,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  Errc code() const noexcept { return code_; }
  /// The message without the category prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace geobridge
