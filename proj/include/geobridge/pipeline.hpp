#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "geobridge/gates.hpp"
#include "geobridge/geodesy.hpp"
#include "geobridge/provider.hpp"
#include "geobridge/raster.hpp"

namespace geobridge {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// The five supported ground-coverage side lengths, meters.
inline constexpr int kCoverageScales[] = {80, 100, 120, 150, 180};
bool is_coverage_scale(int meters) noexcept;

enum class Split { Train, Eval };
std::string_view split_name(Split s) noexcept;
Split parse_split(std::string_view s);

/// Sidecar record accompanying a drone raster.
struct RasterSidecar {
  std::string raster_id;
  AffineGeoTransform transform;
  std::string country;
  Split split = Split::Train;
};
RasterSidecar parse_raster_sidecar(std::string_view json_text);
RasterSidecar load_raster_sidecar(const std::filesystem::path& path);

struct SeedRecord {
  std::string seed_id;
  std::string source_image_id;
  PixelCoord pixel_center;
  GeoPoint geo_center;
  int window_px = 0;
};

std::vector<SeedRecord> generate_seeds(const std::string& raster_id,
                                       const AffineGeoTransform& transform,
                                       int width, int height, int window, int stride);

/// Ground area covered by the seed's pixel window.
GroundFootprint seed_coverage(const SeedRecord& seed, const AffineGeoTransform& transform);

std::string seed_to_json(const SeedRecord& seed);
SeedRecord seed_from_json(std::string_view line);
std::vector<SeedRecord> read_seeds(const std::filesystem::path& path);

/// The provider's nearest panorama when it lies inside `coverage`.
/// Provider faults propagate as ProviderError.
std::optional<PanoLocation> harvest_panorama(const ImageryProvider& provider,
                                             const SeedRecord& seed,
                                             const GroundFootprint& coverage);

struct InverseCrop {
  RgbImage image;
  PixelRect rect;
  GroundFootprint footprint;  ///< realized footprint of `rect`
};

/// Crops the scale_m x scale_m ground square centered on `anchor`, with the
/// pixel window rounded outward. Throws OutOfCoverage when the window leaves
/// the raster.
InverseCrop inverse_crop(const RgbImage& raster, const AffineGeoTransform& transform,
                         const GeoPoint& anchor, double scale_m);

/// Rejects when more than 1% of pixels are pure black or pure white.
GateVerdict validity_screen(const GrayImage& g);

struct DedupCandidate {
  std::string id;
  GroundFootprint footprint;
  GeoPoint anchor;
  int scale_m = 0;
};

/// Candidates of different scale never conflict unless `across_scales`.
struct DedupOptions {
  bool across_scales = true;
};

bool is_duplicate(const DedupCandidate& a, const DedupCandidate& b,
                  const DedupOptions& options = {});

/// Greedy first-wins pass in id order; returns the retained ids.
/// Throws InvalidArgument unless candidates are sorted by id.
std::vector<std::string> dedup(std::span<const DedupCandidate> candidates,
                               const DedupOptions& options = {});

struct TriViewInstance {
  std::string instance_id;
  GeoPoint location;
  std::string country;
  int scale_m = 0;
  std::string drone_asset;
  std::string street_asset;
  std::string satellite_asset;
  std::string description;
  Split split = Split::Train;

  friend bool operator==(const TriViewInstance&, const TriViewInstance&) = default;
};

nlohmann::ordered_json instance_to_json(const TriViewInstance& inst);
TriViewInstance instance_from_json(const nlohmann::json& j);

struct Manifest {
  nlohmann::ordered_json header;
  std::vector<TriViewInstance> instances;
};

void write_manifest(std::ostream& out, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

struct DropRecord {
  std::string stage;
  std::string id;
  std::string reason;
};

void write_drop_log(std::ostream& out, const nlohmann::ordered_json& header,
                    std::span<const DropRecord> drops);

/// Content-addressed image store. References look like
/// "assets/<kind>/<sha256 of pixels>.png". Thread-safe; a null root only
/// computes references.
class AssetStore {
 public:
  explicit AssetStore(std::optional<std::filesystem::path> root = std::nullopt);

  std::string put(std::string_view kind, const RgbImage& image);

 private:
  std::optional<std::filesystem::path> root_;
  std::mutex mutex_;
  std::set<std::string> written_;
};

/// One retained drone crop awaiting tri-view alignment.
struct RetainedCrop {
  std::string instance_id;
  PanoLocation anchor;
  GroundFootprint footprint;
  int scale_m = 0;
  RgbImage image;
};

struct AlignResult {
  std::vector<TriViewInstance> instances;  ///< sorted by instance_id
  std::vector<DropRecord> drops;
};

/// Fetches street (north-facing, level, 120 degree fov) and satellite views
/// for every crop. A failed fetch drops only that instance.
AlignResult align_triples(const ImageryProvider& provider,
                          std::span<const RetainedCrop> crops, const RasterSidecar& source,
                          AssetStore& store, int threads = 1);

struct PipelineConfig {
  std::vector<int> scales{80, 100, 120, 150, 180};
  GateThresholds thresholds;
  bool dedup_across_scales = false;
  int threads = 1;
};

struct StageCounts {
  std::size_t seeds = 0;
  std::size_t harvested = 0;
  std::size_t crops = 0;      ///< anchor x scale crops inside the raster
  std::size_t screened = 0;   ///< passed the validity screen
  std::size_t gated = 0;      ///< passed the gate cascade
  std::size_t deduped = 0;
  std::size_t manifest = 0;
  std::size_t fetch_drops = 0;
};

struct GateLogEntry {
  std::string id;
  GateReport report;
};

struct BuildResult {
  std::vector<TriViewInstance> instances;
  std::vector<DropRecord> drops;  ///< stage order, id order within a stage
  std::vector<GateLogEntry> gate_reports;
  StageCounts counts;
};

/// Runs harvest -> inverse crop -> validity screen -> gate cascade -> dedup
/// -> tri-view alignment. Output does not depend on `config.threads`.
BuildResult build_dataset(std::span<const SeedRecord> seeds, const RgbImage& raster,
                          const RasterSidecar& source, const ImageryProvider& provider,
                          const PipelineConfig& config, AssetStore& store);

}  // namespace geobridge
