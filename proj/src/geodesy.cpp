#include "geobridge/geodesy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "geobridge/error.hpp"

namespace geobridge {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kPolarLimitDeg = 89.0;

struct HalfExtents {
  double lat_deg;
  double lon_deg;
};

HalfExtents half_extents(const GroundFootprint& f) {
  const double lat = f.center().lat();
  if (std::abs(lat) >= kPolarLimitDeg) {
    throw Error(Errc::PolarDegenerate,
                "footprint center latitude " + std::to_string(lat) +
                    " is within 1 degree of a pole");
  }
  return {0.5 * f.height_m() / kMetersPerDegree,
          0.5 * f.width_m() / (kMetersPerDegree * std::cos(lat * kDegToRad))};
}

// Longitude of `lon` shifted by a multiple of 360 so it lies within 180
// degrees of `reference`.
double unwrap_near(double lon, double reference) {
  return reference + normalize_longitude(lon - reference);
}

double interval_overlap(double lo_a, double hi_a, double lo_b, double hi_b) {
  return std::max(0.0, std::min(hi_a, hi_b) - std::max(lo_a, lo_b));
}

}  // namespace

double normalize_longitude(double lon) {
  if (!std::isfinite(lon)) {
    throw Error(Errc::InvalidArgument, "longitude is not finite");
  }
  if (lon >= -180.0 && lon < 180.0) return lon;
  double wrapped = std::fmod(lon + 180.0, 360.0);
  if (wrapped < 0.0) wrapped += 360.0;
  wrapped -= 180.0;
  if (wrapped >= 180.0) wrapped -= 360.0;
  return wrapped;
}

GeoPoint::GeoPoint(double lat, double lon) {
  if (!std::isfinite(lat) || lat < -90.0 || lat > 90.0) {
    throw Error(Errc::InvalidArgument,
                "latitude " + std::to_string(lat) + " outside [-90, 90]");
  }
  lat_ = lat;
  lon_ = normalize_longitude(lon);
}

AffineGeoTransform AffineGeoTransform::from_array(
    const std::array<double, 6>& c) {
  return {c[0], c[1], c[2], c[3], c[4], c[5]};
}

std::array<double, 6> AffineGeoTransform::to_array() const {
  return {origin_x, pixel_width, row_rotation, origin_y, col_rotation,
          pixel_height};
}

bool AffineGeoTransform::is_invertible() const noexcept {
  const double det = determinant();
  const double scale = std::max(std::abs(pixel_width * pixel_height),
                                std::abs(row_rotation * col_rotation));
  return std::isfinite(det) && det != 0.0 && std::abs(det) > 1e-12 * scale;
}

GeoPoint GeoBBox::center() const {
  return GeoPoint(0.5 * (lat_min + lat_max), 0.5 * (lon_min + lon_max));
}

GroundFootprint::GroundFootprint(GeoPoint center, double width_m,
                                 double height_m)
    : center_(center), width_m_(width_m), height_m_(height_m) {
  if (!(std::isfinite(width_m) && width_m > 0.0) ||
      !(std::isfinite(height_m) && height_m > 0.0)) {
    throw Error(Errc::InvalidArgument,
                "footprint sides must be positive, got " +
                    std::to_string(width_m) + " x " + std::to_string(height_m));
  }
}

double haversine_distance(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = a.lat() * kDegToRad;
  const double phi2 = b.lat() * kDegToRad;
  const double dphi = phi2 - phi1;
  const double dlambda = (b.lon() - a.lon()) * kDegToRad;
  const double s_phi = std::sin(0.5 * dphi);
  const double s_lambda = std::sin(0.5 * dlambda);
  double h = s_phi * s_phi + std::cos(phi1) * std::cos(phi2) * s_lambda * s_lambda;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::atan2(std::sqrt(h), std::sqrt(1.0 - h));
}

GeoPoint pixel_to_geo(const AffineGeoTransform& t, double col, double row) {
  const double lon = t.origin_x + col * t.pixel_width + row * t.row_rotation;
  const double lat = t.origin_y + col * t.col_rotation + row * t.pixel_height;
  return GeoPoint(lat, lon);
}

PixelCoord geo_to_pixel(const AffineGeoTransform& t, const GeoPoint& p) {
  if (!t.is_invertible()) {
    throw Error(Errc::SingularTransform,
                "affine transform linear part has determinant " +
                    std::to_string(t.determinant()));
  }
  const double det = t.determinant();
  const double dx = p.lon() - t.origin_x;
  const double dy = p.lat() - t.origin_y;
  return {(t.pixel_height * dx - t.row_rotation * dy) / det,
          (t.pixel_width * dy - t.col_rotation * dx) / det};
}

GeoBBox footprint_bbox(const GroundFootprint& f) {
  const auto h = half_extents(f);
  const auto& c = f.center();
  return {c.lat() - h.lat_deg, c.lat() + h.lat_deg, c.lon() - h.lon_deg,
          c.lon() + h.lon_deg};
}

double overlap_ratio(const GroundFootprint& a, const GroundFootprint& b) {
  const GeoBBox ba = footprint_bbox(a);
  GeoBBox bb = footprint_bbox(b);
  const double shift =
      unwrap_near(b.center().lon(), a.center().lon()) - b.center().lon();
  bb.lon_min += shift;
  bb.lon_max += shift;

  const double inter =
      interval_overlap(ba.lat_min, ba.lat_max, bb.lat_min, bb.lat_max) *
      interval_overlap(ba.lon_min, ba.lon_max, bb.lon_min, bb.lon_max);
  const double area_a = (ba.lat_max - ba.lat_min) * (ba.lon_max - ba.lon_min);
  const double area_b = (bb.lat_max - bb.lat_min) * (bb.lon_max - bb.lon_min);
  return std::clamp(inter / std::min(area_a, area_b), 0.0, 1.0);
}

bool contains(const GroundFootprint& f, const GeoPoint& p) {
  const GeoBBox box = footprint_bbox(f);
  if (p.lat() < box.lat_min || p.lat() > box.lat_max) return false;
  for (const double lon : {p.lon(), p.lon() - 360.0, p.lon() + 360.0}) {
    if (lon >= box.lon_min && lon <= box.lon_max) return true;
  }
  return false;
}

PixelGroundSize pixel_ground_size(const AffineGeoTransform& t, double col,
                                  double row) {
  const double lat = t.origin_y + col * t.col_rotation + row * t.pixel_height;
  const double kx = kMetersPerDegree * std::cos(lat * kDegToRad);
  const double ky = kMetersPerDegree;
  return {std::hypot(t.pixel_width * kx, t.col_rotation * ky),
          std::hypot(t.row_rotation * kx, t.pixel_height * ky)};
}

}  // namespace geobridge
