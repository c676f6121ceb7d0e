#pragma once

#include <array>
#include <numbers>

namespace geobridge {

/// Spherical Earth radius, meters. All geodesy uses this sphere.
inline constexpr double kEarthRadiusM = 6'371'000.0;

/// Length of one degree of arc on the sphere, meters.
inline constexpr double kMetersPerDegree =
    2.0 * std::numbers::pi * kEarthRadiusM / 360.0;

/// Geographic coordinate in degrees. Latitude is checked against [-90, 90]
/// and longitude is wrapped into [-180, 180).
class GeoPoint {
 public:
  GeoPoint() = default;
  GeoPoint(double lat, double lon);

  double lat() const noexcept { return lat_; }
  double lon() const noexcept { return lon_; }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

 private:
  double lat_ = 0.0;
  double lon_ = 0.0;
};

/// Wraps any finite longitude into [-180, 180).
double normalize_longitude(double lon);

/// GDAL-ordered affine map from pixel (col, row) to world (lon, lat):
///   lon = origin_x + col * pixel_width + row * row_rotation
///   lat = origin_y + col * col_rotation + row * pixel_height
struct AffineGeoTransform {
  double origin_x = 0.0;
  double pixel_width = 1.0;
  double row_rotation = 0.0;
  double origin_y = 0.0;
  double col_rotation = 0.0;
  double pixel_height = 1.0;

  static AffineGeoTransform from_array(const std::array<double, 6>& c);
  std::array<double, 6> to_array() const;

  double determinant() const noexcept {
    return pixel_width * pixel_height - row_rotation * col_rotation;
  }
  bool is_invertible() const noexcept;
};

struct PixelCoord {
  double col = 0.0;
  double row = 0.0;
};

/// Axis-aligned lat/lon rectangle.
struct GeoBBox {
  double lat_min = 0.0;
  double lat_max = 0.0;
  double lon_min = 0.0;
  double lon_max = 0.0;

  GeoPoint center() const;
};

/// Metric ground-coverage rectangle centered on a point.
class GroundFootprint {
 public:
  GroundFootprint(GeoPoint center, double width_m, double height_m);

  const GeoPoint& center() const noexcept { return center_; }
  double width_m() const noexcept { return width_m_; }
  double height_m() const noexcept { return height_m_; }

 private:
  GeoPoint center_;
  double width_m_;
  double height_m_;
};

double haversine_distance(const GeoPoint& a, const GeoPoint& b);

GeoPoint pixel_to_geo(const AffineGeoTransform& t, double col, double row);

/// Throws SingularTransform when the linear part has no inverse.
PixelCoord geo_to_pixel(const AffineGeoTransform& t, const GeoPoint& p);

/// Local equirectangular bounding box. Throws PolarDegenerate for
/// |lat| >= 89.
GeoBBox footprint_bbox(const GroundFootprint& f);

/// Intersection area over the smaller footprint's area, in [0, 1].
double overlap_ratio(const GroundFootprint& a, const GroundFootprint& b);

/// Boundary-inclusive point-in-footprint test.
bool contains(const GroundFootprint& f, const GeoPoint& p);

/// Ground size of one pixel at the given pixel position, meters
/// (east-west, north-south). Only meaningful for north-up transforms.
struct PixelGroundSize {
  double x_m;
  double y_m;
};
PixelGroundSize pixel_ground_size(const AffineGeoTransform& t, double col,
                                  double row);

}  // namespace geobridge
