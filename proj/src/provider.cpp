#include "geobridge/provider.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "geobridge/error.hpp"
#include "geobridge/hashing.hpp"
#include "geobridge/image_io.hpp"

namespace geobridge {
namespace {

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::vector<std::uint8_t> read_asset(const std::filesystem::path& path,
                                     const char* kind) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(Errc::ProviderError,
                std::string("fixture has no ") + kind + " asset " + path.filename().string());
  }
  try {
    return read_file_bytes(path);
  } catch (const Error& e) {
    throw Error(Errc::ProviderError, e.detail());
  }
}

}  // namespace

std::string fixed7(double degrees) {
  const long long q = std::llround(degrees * 1e7);
  const unsigned long long mag = static_cast<unsigned long long>(q < 0 ? -q : q);
  std::string frac = std::to_string(mag % 10'000'000ULL);
  frac.insert(0, 7 - frac.size(), '0');
  return (q < 0 ? "-" : "") + std::to_string(mag / 10'000'000ULL) + "." + frac;
}

std::string location_key(const GeoPoint& p) {
  return fixed7(p.lat()) + "_" + fixed7(p.lon());
}

FixtureProvider::FixtureProvider(std::filesystem::path root) : root_(std::move(root)) {
  const auto street_dir = root_ / "street";
  std::error_code ec;
  if (!std::filesystem::is_directory(street_dir, ec)) {
    throw Error(Errc::ProviderError,
                "fixture root " + root_.string() + " has no street/ directory");
  }
  for (const auto& entry : std::filesystem::directory_iterator(street_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    const std::string stem = entry.path().stem().string();
    const auto sep = stem.find('_');
    const auto lat = sep == std::string::npos ? std::nullopt : parse_number(stem.substr(0, sep));
    const auto lon = sep == std::string::npos ? std::nullopt : parse_number(stem.substr(sep + 1));
    if (!lat || !lon) {
      throw Error(Errc::ProviderError, "malformed street asset name " + stem);
    }
    panoramas_.push_back({stem, GeoPoint(*lat, *lon)});
  }
  std::sort(panoramas_.begin(), panoramas_.end(),
            [](const PanoLocation& a, const PanoLocation& b) { return a.pano_id < b.pano_id; });
}

std::string FixtureProvider::identity() const {
  // Name plus a digest of the asset listing, so a changed fixture is visible
  // in provenance without depending on where the fixture lives.
  std::vector<std::string> listing;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root_)) {
    if (!entry.is_regular_file()) continue;
    listing.push_back(std::filesystem::relative(entry.path(), root_).generic_string() + ":" +
                      std::to_string(entry.file_size()));
  }
  std::sort(listing.begin(), listing.end());
  std::string joined;
  for (const auto& line : listing) joined += line + "\n";
  return "fixture:" + root_.filename().string() + "@" + sha256_hex(joined).substr(0, 12);
}

std::optional<PanoLocation> FixtureProvider::nearest_panorama(const GeoPoint& near) const {
  const PanoLocation* best = nullptr;
  double best_d = 0.0;
  for (const auto& pano : panoramas_) {
    const double d = haversine_distance(near, pano.location);
    // panoramas_ is id-sorted, so strict < keeps the lowest id on ties.
    if (best == nullptr || d < best_d) {
      best = &pano;
      best_d = d;
    }
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

std::vector<std::uint8_t> FixtureProvider::fetch_street_view(const StreetViewRequest& req) const {
  return read_asset(root_ / "street" / (location_key(req.pano.location) + ".png"), "street");
}

std::vector<std::uint8_t> FixtureProvider::fetch_satellite(const SatelliteRequest& req) const {
  return read_asset(root_ / "satellite" / (location_key(req.center) + ".png"), "satellite");
}

std::optional<std::string> FixtureProvider::description(const PanoLocation& pano) const {
  const auto path = root_ / "text" / (location_key(pano.location) + ".txt");
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

QueryParams street_view_image_params(const StreetViewRequest& req) {
  return {{"size", std::to_string(req.width_px) + "x" + std::to_string(req.height_px)},
          {"pano", req.pano.pano_id},
          {"heading", format_double(req.heading_deg)},
          {"pitch", format_double(req.pitch_deg)},
          {"fov", format_double(req.fov_deg)}};
}

QueryParams street_view_metadata_params(const GeoPoint& near) {
  return {{"location", fixed7(near.lat()) + "," + fixed7(near.lon())}};
}

QueryParams satellite_params(const SatelliteRequest& req) {
  const auto& b = req.bounds;
  return {{"size", std::to_string(req.width_px) + "x" + std::to_string(req.height_px)},
          {"maptype", "satellite"},
          {"center", fixed7(req.center.lat()) + "," + fixed7(req.center.lon())},
          {"visible", fixed7(b.lat_min) + "," + fixed7(b.lon_min) + "|" + fixed7(b.lat_max) +
                          "," + fixed7(b.lon_max)}};
}

}  // namespace geobridge
