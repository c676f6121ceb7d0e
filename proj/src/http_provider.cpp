#include <httplib.h>

#include <nlohmann/json.hpp>

#include "geobridge/error.hpp"
#include "geobridge/provider.hpp"

namespace geobridge {
namespace {

std::vector<std::uint8_t> to_bytes(const std::string& body) {
  return {body.begin(), body.end()};
}

}  // namespace

HttpProvider::HttpProvider(std::string base_url, std::string api_key)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {}

std::string HttpProvider::identity() const { return "http:" + base_url_; }

std::string HttpProvider::get(const std::string& path, QueryParams params) const {
  httplib::Client client(base_url_);
  client.set_connection_timeout(10);
  client.set_read_timeout(30);
  httplib::Params query;
  for (auto& [k, v] : params) query.emplace(std::move(k), std::move(v));
  if (!api_key_.empty()) query.emplace("key", api_key_);
  auto res = client.Get(path, query, httplib::Headers{});
  if (!res) {
    throw Error(Errc::ProviderError,
                "GET " + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(Errc::ProviderError,
                "GET " + path + " returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

std::optional<PanoLocation> HttpProvider::nearest_panorama(const GeoPoint& near) const {
  const auto body = get("/maps/api/streetview/metadata", street_view_metadata_params(near));
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ProviderError, std::string("metadata is not JSON: ") + e.what());
  }
  const auto status = meta.value("status", std::string{});
  if (status == "ZERO_RESULTS" || status == "NOT_FOUND") return std::nullopt;
  if (status != "OK") throw Error(Errc::ProviderError, "metadata status " + status);
  try {
    const auto& loc = meta.at("location");
    return PanoLocation{meta.at("pano_id").get<std::string>(),
                        GeoPoint(loc.at("lat").get<double>(), loc.at("lng").get<double>())};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ProviderError, std::string("malformed metadata: ") + e.what());
  }
}

std::vector<std::uint8_t> HttpProvider::fetch_street_view(const StreetViewRequest& req) const {
  return to_bytes(get("/maps/api/streetview", street_view_image_params(req)));
}

std::vector<std::uint8_t> HttpProvider::fetch_satellite(const SatelliteRequest& req) const {
  return to_bytes(get("/maps/api/staticmap", satellite_params(req)));
}

}  // namespace geobridge
