#include "geobridge/error.hpp"

namespace geobridge {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::SingularTransform: return "SingularTransform";
    case Errc::PolarDegenerate: return "PolarDegenerate";
    case Errc::DecodeError: return "DecodeError";
    case Errc::EncodeError: return "EncodeError";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::WindowTooLarge: return "WindowTooLarge";
    case Errc::ImageTooSmall: return "ImageTooSmall";
    case Errc::ProviderError: return "ProviderError";
    case Errc::OutOfCoverage: return "OutOfCoverage";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::KOutOfRange: return "KOutOfRange";
    case Errc::BadTarget: return "BadTarget";
    case Errc::BatchMisaligned: return "BatchMisaligned";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::Diverged: return "Diverged";
    case Errc::MissingFootprint: return "MissingFootprint";
    case Errc::MissingLocation: return "MissingLocation";
    case Errc::EmptyQuerySet: return "EmptyQuerySet";
    case Errc::FormatError: return "FormatError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace geobridge
