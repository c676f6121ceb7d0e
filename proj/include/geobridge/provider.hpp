#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geobridge/geodesy.hpp"

namespace geobridge {

struct PanoLocation {
  std::string pano_id;
  GeoPoint location;

  friend bool operator==(const PanoLocation&, const PanoLocation&) = default;
};

/// Street-level image request. Defaults reproduce the collection protocol:
/// camera facing north, level pitch, 120 degree field of view.
struct StreetViewRequest {
  PanoLocation pano;
  double heading_deg = 0.0;
  double pitch_deg = 0.0;
  double fov_deg = 120.0;
  int width_px = 640;
  int height_px = 640;
};

struct SatelliteRequest {
  GeoPoint center;
  GeoBBox bounds;
  int width_px = 640;
  int height_px = 640;
};

/// Source of panoramas, street imagery and satellite tiles. Implementations
/// must be safe to call concurrently. Faults are reported by throwing
/// Error(Errc::ProviderError); "nothing there" is an empty optional.
class ImageryProvider {
 public:
  virtual ~ImageryProvider() = default;

  /// Stable identity echoed into output provenance.
  virtual std::string identity() const = 0;

  virtual std::optional<PanoLocation> nearest_panorama(const GeoPoint& near) const = 0;
  virtual std::vector<std::uint8_t> fetch_street_view(const StreetViewRequest& req) const = 0;
  virtual std::vector<std::uint8_t> fetch_satellite(const SatelliteRequest& req) const = 0;

  /// Scene description for a location, when the provider carries one.
  virtual std::optional<std::string> description(const PanoLocation&) const {
    return std::nullopt;
  }
};

/// Fixed-point (1e-7 degree) coordinate text, e.g. "48.8566000".
std::string fixed7(double degrees);

/// "<lat7>_<lon7>", the asset key of a location.
std::string location_key(const GeoPoint& p);

/// Filesystem fixture backend. Layout under `root`:
///   street/<lat7>_<lon7>.png     one file per panorama (defines the panoramas)
///   satellite/<lat7>_<lon7>.png  tile keyed by the requested center
///   text/<lat7>_<lon7>.txt       optional scene description
class FixtureProvider final : public ImageryProvider {
 public:
  explicit FixtureProvider(std::filesystem::path root);

  std::string identity() const override;
  std::optional<PanoLocation> nearest_panorama(const GeoPoint& near) const override;
  std::vector<std::uint8_t> fetch_street_view(const StreetViewRequest& req) const override;
  std::vector<std::uint8_t> fetch_satellite(const SatelliteRequest& req) const override;
  std::optional<std::string> description(const PanoLocation& pano) const override;

  const std::vector<PanoLocation>& panoramas() const noexcept { return panoramas_; }

 private:
  std::filesystem::path root_;
  std::vector<PanoLocation> panoramas_;
};

using QueryParams = std::vector<std::pair<std::string, std::string>>;

/// Query parameters of the Street View Static API image and metadata calls
/// and the Static Maps satellite call, without the API key.
QueryParams street_view_image_params(const StreetViewRequest& req);
QueryParams street_view_metadata_params(const GeoPoint& near);
QueryParams satellite_params(const SatelliteRequest& req);

/// HTTP backend speaking the Google Maps Platform request format.
/// `base_url` is e.g. "https://maps.googleapis.com".
class HttpProvider final : public ImageryProvider {
 public:
  HttpProvider(std::string base_url, std::string api_key);

  std::string identity() const override;
  std::optional<PanoLocation> nearest_panorama(const GeoPoint& near) const override;
  std::vector<std::uint8_t> fetch_street_view(const StreetViewRequest& req) const override;
  std::vector<std::uint8_t> fetch_satellite(const SatelliteRequest& req) const override;

 private:
  std::string get(const std::string& path, QueryParams params) const;

  std::string base_url_;
  std::string api_key_;
};

}  // namespace geobridge
