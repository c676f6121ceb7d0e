#include "geobridge/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "geobridge/error.hpp"
#include "geobridge/hashing.hpp"
#include "geobridge/image_io.hpp"
#include "parallel.hpp"
#include "text_format.hpp"

namespace geobridge {
namespace {

using detail::shortest;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kSaturationLimit = 0.01;
constexpr double kDuplicateOverlap = 0.5;
constexpr double kSameCoordinateDeg = 1e-9;

std::string zero_pad(std::size_t value, std::size_t width) {
  std::string s = std::to_string(value);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

std::string instance_id_for(const SeedRecord& seed, const PanoLocation& pano, int scale) {
  return seed.seed_id + "-p" + pano.pano_id + "-m" + zero_pad(static_cast<std::size_t>(scale), 3);
}

ordered_json point_json(const GeoPoint& p) {
  ordered_json j;
  j["lat"] = p.lat();
  j["lon"] = p.lon();
  return j;
}

GeoPoint point_from_json(const json& j) {
  return GeoPoint(j.at("lat").get<double>(), j.at("lon").get<double>());
}

template <typename Fn>
auto with_format_errors(std::string_view what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, std::string(what) + ": " + e.what());
  }
}

std::size_t stage_rank(std::string_view stage) {
  static constexpr std::string_view kOrder[] = {"harvest", "crop", "screen",
                                                "gate",    "dedup", "align"};
  for (std::size_t i = 0; i < std::size(kOrder); ++i) {
    if (kOrder[i] == stage) return i;
  }
  return std::size(kOrder);
}

struct DedupDecision {
  std::optional<std::size_t> duplicate_of;  // index of the retained candidate
};

std::vector<DedupDecision> dedup_pass(std::span<const DedupCandidate> candidates,
                                      const DedupOptions& options) {
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (!(candidates[i - 1].id < candidates[i].id)) {
      throw Error(Errc::InvalidArgument,
                  "dedup candidates must be sorted by unique id; '" + candidates[i].id +
                      "' follows '" + candidates[i - 1].id + "'");
    }
  }
  std::vector<DedupDecision> decisions(candidates.size());
  std::vector<std::size_t> retained;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (const auto r : retained) {
      if (is_duplicate(candidates[r], candidates[i], options)) {
        decisions[i].duplicate_of = r;
        break;
      }
    }
    if (!decisions[i].duplicate_of) retained.push_back(i);
  }
  return decisions;
}

}  // namespace

bool is_coverage_scale(int meters) noexcept {
  return std::find(std::begin(kCoverageScales), std::end(kCoverageScales), meters) !=
         std::end(kCoverageScales);
}

std::string_view split_name(Split s) noexcept {
  return s == Split::Train ? "train" : "eval";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "eval") return Split::Eval;
  throw Error(Errc::FormatError, "split must be 'train' or 'eval', got '" + std::string(s) + "'");
}

RasterSidecar parse_raster_sidecar(std::string_view json_text) {
  return with_format_errors("raster sidecar", [&] {
    const auto j = json::parse(json_text);
    RasterSidecar s;
    s.raster_id = j.at("raster_id").get<std::string>();
    if (s.raster_id.empty()) throw Error(Errc::FormatError, "raster sidecar: empty raster_id");
    s.transform = AffineGeoTransform::from_array(j.at("geotransform").get<std::array<double, 6>>());
    if (!s.transform.is_invertible()) {
      throw Error(Errc::SingularTransform, "raster sidecar geotransform is not invertible");
    }
    s.country = j.value("country", std::string{});
    s.split = parse_split(j.value("split", std::string{"train"}));
    return s;
  });
}

RasterSidecar load_raster_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open sidecar " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_raster_sidecar(buffer.str());
}

std::vector<SeedRecord> generate_seeds(const std::string& raster_id,
                                       const AffineGeoTransform& transform, int width,
                                       int height, int window, int stride) {
  const auto windows = sliding_windows(width, height, window, stride);
  const std::size_t digits =
      std::max<std::size_t>(5, std::to_string(windows.empty() ? 0 : windows.size() - 1).size());
  std::vector<SeedRecord> seeds;
  seeds.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    const PixelCoord center{w.col0 + 0.5 * w.size, w.row0 + 0.5 * w.size};
    seeds.push_back({raster_id + "-" + zero_pad(i, digits), raster_id, center,
                     pixel_to_geo(transform, center.col, center.row), w.size});
  }
  return seeds;
}

GroundFootprint seed_coverage(const SeedRecord& seed, const AffineGeoTransform& transform) {
  const auto gsd = pixel_ground_size(transform, seed.pixel_center.col, seed.pixel_center.row);
  return GroundFootprint(seed.geo_center, seed.window_px * gsd.x_m, seed.window_px * gsd.y_m);
}

std::string seed_to_json(const SeedRecord& seed) {
  ordered_json j;
  j["seed_id"] = seed.seed_id;
  j["source_image_id"] = seed.source_image_id;
  j["pixel_center"] = {seed.pixel_center.col, seed.pixel_center.row};
  j["geo_center"] = point_json(seed.geo_center);
  j["window"] = seed.window_px;
  return j.dump();
}

SeedRecord seed_from_json(std::string_view line) {
  return with_format_errors("seed record", [&] {
    const auto j = json::parse(line);
    SeedRecord s;
    s.seed_id = j.at("seed_id").get<std::string>();
    s.source_image_id = j.at("source_image_id").get<std::string>();
    const auto& pc = j.at("pixel_center");
    s.pixel_center = {pc.at(0).get<double>(), pc.at(1).get<double>()};
    s.geo_center = point_from_json(j.at("geo_center"));
    s.window_px = j.at("window").get<int>();
    if (s.window_px < 1) throw Error(Errc::FormatError, "seed window must be >= 1");
    return s;
  });
}

std::vector<SeedRecord> read_seeds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open seeds file " + path.string());
  std::vector<SeedRecord> seeds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      seeds.push_back(seed_from_json(line));
    } catch (const Error& e) {
      throw Error(e.code(), path.filename().string() + " line " + std::to_string(line_no) +
                                ": " + e.detail());
    }
  }
  return seeds;
}

std::optional<PanoLocation> harvest_panorama(const ImageryProvider& provider,
                                             const SeedRecord& seed,
                                             const GroundFootprint& coverage) {
  auto pano = provider.nearest_panorama(seed.geo_center);
  if (pano && contains(coverage, pano->location)) return pano;
  return std::nullopt;
}

InverseCrop inverse_crop(const RgbImage& raster, const AffineGeoTransform& transform,
                         const GeoPoint& anchor, double scale_m) {
  const GeoBBox box = footprint_bbox(GroundFootprint(anchor, scale_m, scale_m));
  double col_min = INFINITY, col_max = -INFINITY, row_min = INFINITY, row_max = -INFINITY;
  for (const double lat : {box.lat_min, box.lat_max}) {
    for (const double lon : {box.lon_min, box.lon_max}) {
      const auto px = geo_to_pixel(transform, GeoPoint(lat, lon));
      col_min = std::min(col_min, px.col);
      col_max = std::max(col_max, px.col);
      row_min = std::min(row_min, px.row);
      row_max = std::max(row_max, px.row);
    }
  }
  const double c0 = std::floor(col_min), c1 = std::ceil(col_max);
  const double r0 = std::floor(row_min), r1 = std::ceil(row_max);
  if (c0 < 0 || r0 < 0 || c1 > raster.width() || r1 > raster.height()) {
    throw Error(Errc::OutOfCoverage,
                std::to_string(static_cast<int>(scale_m)) + " m footprint at " +
                    location_key(anchor) + " needs pixels [" + shortest(c0) + "," +
                    shortest(c1) + ")x[" + shortest(r0) + "," + shortest(r1) +
                    ") outside the " + std::to_string(raster.width()) + "x" +
                    std::to_string(raster.height()) + " raster");
  }
  const PixelRect rect{static_cast<int>(c0), static_cast<int>(r0),
                       static_cast<int>(c1 - c0), static_cast<int>(r1 - r0)};

  double lat_lo = INFINITY, lat_hi = -INFINITY, lon_lo = INFINITY, lon_hi = -INFINITY;
  for (const int dc : {0, rect.width}) {
    for (const int dr : {0, rect.height}) {
      const auto g = pixel_to_geo(transform, rect.col0 + dc, rect.row0 + dr);
      lat_lo = std::min(lat_lo, g.lat());
      lat_hi = std::max(lat_hi, g.lat());
      lon_lo = std::min(lon_lo, g.lon());
      lon_hi = std::max(lon_hi, g.lon());
    }
  }
  const GeoPoint center(0.5 * (lat_lo + lat_hi), 0.5 * (lon_lo + lon_hi));
  const double width_m =
      (lon_hi - lon_lo) * kMetersPerDegree * std::cos(center.lat() * std::numbers::pi / 180.0);
  const double height_m = (lat_hi - lat_lo) * kMetersPerDegree;
  return {crop(raster, rect), rect, GroundFootprint(center, width_m, height_m)};
}

GateVerdict validity_screen(const GrayImage& g) {
  const auto sat = saturated_ratio(g);
  return (sat.black > kSaturationLimit || sat.white > kSaturationLimit) ? GateVerdict::Reject
                                                                        : GateVerdict::Pass;
}

bool is_duplicate(const DedupCandidate& a, const DedupCandidate& b,
                  const DedupOptions& options) {
  if (!options.across_scales && a.scale_m != b.scale_m) return false;
  const bool same_point =
      std::abs(a.anchor.lat() - b.anchor.lat()) <= kSameCoordinateDeg &&
      std::abs(normalize_longitude(a.anchor.lon() - b.anchor.lon())) <= kSameCoordinateDeg;
  return same_point || overlap_ratio(a.footprint, b.footprint) > kDuplicateOverlap;
}

std::vector<std::string> dedup(std::span<const DedupCandidate> candidates,
                               const DedupOptions& options) {
  const auto decisions = dedup_pass(candidates, options);
  std::vector<std::string> retained;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!decisions[i].duplicate_of) retained.push_back(candidates[i].id);
  }
  return retained;
}

ordered_json instance_to_json(const TriViewInstance& inst) {
  ordered_json j;
  j["instance_id"] = inst.instance_id;
  j["location"] = point_json(inst.location);
  j["country"] = inst.country;
  j["scale_m"] = inst.scale_m;
  j["drone_asset"] = inst.drone_asset;
  j["street_asset"] = inst.street_asset;
  j["satellite_asset"] = inst.satellite_asset;
  j["description"] = inst.description;
  j["split"] = split_name(inst.split);
  return j;
}

TriViewInstance instance_from_json(const json& j) {
  return with_format_errors("manifest instance", [&] {
    TriViewInstance inst;
    inst.instance_id = j.at("instance_id").get<std::string>();
    inst.location = point_from_json(j.at("location"));
    inst.country = j.at("country").get<std::string>();
    inst.scale_m = j.at("scale_m").get<int>();
    inst.drone_asset = j.at("drone_asset").get<std::string>();
    inst.street_asset = j.at("street_asset").get<std::string>();
    inst.satellite_asset = j.at("satellite_asset").get<std::string>();
    inst.description = j.at("description").get<std::string>();
    inst.split = parse_split(j.at("split").get<std::string>());
    if (!is_coverage_scale(inst.scale_m)) {
      throw Error(Errc::FormatError, "instance " + inst.instance_id + " has scale_m " +
                                         std::to_string(inst.scale_m));
    }
    if (inst.drone_asset.empty() || inst.street_asset.empty() || inst.satellite_asset.empty()) {
      throw Error(Errc::FormatError, "instance " + inst.instance_id + " is missing an asset");
    }
    return inst;
  });
}

void write_manifest(std::ostream& out, const Manifest& manifest) {
  out << manifest.header.dump() << '\n';
  for (const auto& inst : manifest.instances) out << instance_to_json(inst).dump() << '\n';
  if (!out) throw Error(Errc::IoError, "manifest write failed");
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open manifest " + path.string());
  Manifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = path.filename().string() + " line " + std::to_string(line_no);
    if (line_no == 1) {
      m.header = with_format_errors(where, [&] { return ordered_json::parse(line); });
      if (m.header.value("kind", std::string{}) != "geobridge.manifest") {
        throw Error(Errc::FormatError, where + ": missing manifest header");
      }
      continue;
    }
    auto inst = instance_from_json(with_format_errors(where, [&] { return json::parse(line); }));
    if (!m.instances.empty() && !(m.instances.back().instance_id < inst.instance_id)) {
      throw Error(Errc::FormatError, where + ": instance ids not strictly increasing");
    }
    m.instances.push_back(std::move(inst));
  }
  if (line_no == 0) throw Error(Errc::FormatError, path.string() + " is empty");
  return m;
}

void write_drop_log(std::ostream& out, const ordered_json& header,
                    std::span<const DropRecord> drops) {
  out << header.dump() << '\n';
  for (const auto& d : drops) {
    ordered_json j;
    j["stage"] = d.stage;
    j["id"] = d.id;
    j["reason"] = d.reason;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(Errc::IoError, "drop log write failed");
}

AssetStore::AssetStore(std::optional<std::filesystem::path> root) : root_(std::move(root)) {}

std::string AssetStore::put(std::string_view kind, const RgbImage& image) {
  const std::string dims = std::to_string(image.width()) + "x" + std::to_string(image.height()) + "\n";
  std::vector<std::uint8_t> payload(dims.begin(), dims.end());
  payload.insert(payload.end(), image.data().begin(), image.data().end());
  const std::string rel = "assets/" + std::string(kind) + "/" + sha256_hex(payload) + ".png";
  if (!root_) return rel;

  std::lock_guard lock(mutex_);
  if (written_.insert(rel).second) {
    const auto path = *root_ / rel;
    std::filesystem::create_directories(path.parent_path());
    save_png(path, image);
  }
  return rel;
}

AlignResult align_triples(const ImageryProvider& provider, std::span<const RetainedCrop> crops,
                          const RasterSidecar& source, AssetStore& store, int threads) {
  struct Slot {
    std::optional<TriViewInstance> instance;
    std::optional<DropRecord> drop;
  };
  std::vector<Slot> slots(crops.size());
  detail::parallel_for(crops.size(), threads, [&](std::size_t i) {
    const auto& crop = crops[i];
    try {
      TriViewInstance inst;
      inst.instance_id = crop.instance_id;
      inst.location = crop.anchor.location;
      inst.country = source.country;
      inst.scale_m = crop.scale_m;
      inst.split = source.split;

      StreetViewRequest street;
      street.pano = crop.anchor;
      const auto street_img = decode_image(provider.fetch_street_view(street));

      SatelliteRequest sat;
      sat.center = crop.anchor.location;
      sat.bounds = footprint_bbox(crop.footprint);
      const auto sat_img = decode_image(provider.fetch_satellite(sat));

      inst.description = provider.description(crop.anchor).value_or("");
      inst.drone_asset = store.put("drone", crop.image);
      inst.street_asset = store.put("street", street_img);
      inst.satellite_asset = store.put("satellite", sat_img);
      slots[i].instance = std::move(inst);
    } catch (const Error& e) {
      slots[i].drop = DropRecord{"align", crop.instance_id, e.what()};
    }
  });

  AlignResult result;
  for (auto& slot : slots) {
    if (slot.instance) result.instances.push_back(std::move(*slot.instance));
    if (slot.drop) result.drops.push_back(std::move(*slot.drop));
  }
  auto by_id = [](const auto& a, const auto& b) { return a.instance_id < b.instance_id; };
  std::sort(result.instances.begin(), result.instances.end(), by_id);
  std::sort(result.drops.begin(), result.drops.end(),
            [](const DropRecord& a, const DropRecord& b) { return a.id < b.id; });
  return result;
}

BuildResult build_dataset(std::span<const SeedRecord> seeds, const RgbImage& raster,
                          const RasterSidecar& source, const ImageryProvider& provider,
                          const PipelineConfig& config, AssetStore& store) {
  config.thresholds.validate();
  for (const int s : config.scales) {
    if (!is_coverage_scale(s)) {
      throw Error(Errc::InvalidArgument, "unsupported coverage scale " + std::to_string(s));
    }
  }
  for (const auto& seed : seeds) {
    if (seed.source_image_id != source.raster_id) {
      throw Error(Errc::InvalidArgument, "seed " + seed.seed_id + " belongs to raster '" +
                                             seed.source_image_id + "', not '" +
                                             source.raster_id + "'");
    }
  }

  BuildResult out;
  out.counts.seeds = seeds.size();

  // Stage 2a: harvest one panorama per seed.
  struct Harvest {
    std::optional<PanoLocation> pano;
    std::optional<DropRecord> drop;
  };
  std::vector<Harvest> harvest(seeds.size());
  detail::parallel_for(seeds.size(), config.threads, [&](std::size_t i) {
    const auto& seed = seeds[i];
    try {
      const auto coverage = seed_coverage(seed, source.transform);
      const auto nearest = provider.nearest_panorama(seed.geo_center);
      if (!nearest) {
        harvest[i].drop = DropRecord{"harvest", seed.seed_id, "no panorama available"};
      } else if (!contains(coverage, nearest->location)) {
        harvest[i].drop = DropRecord{"harvest", seed.seed_id,
                                     "nearest panorama " + nearest->pano_id +
                                         " lies outside the seed coverage"};
      } else {
        harvest[i].pano = nearest;
      }
    } catch (const Error& e) {
      harvest[i].drop = DropRecord{"harvest", seed.seed_id, e.what()};
    }
  });

  // Stage 2b/3: multi-scale inverse crops, validity screen, gate cascade.
  struct Job {
    const SeedRecord* seed;
    PanoLocation pano;
    int scale;
    std::string id;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (harvest[i].drop) out.drops.push_back(*harvest[i].drop);
    if (!harvest[i].pano) continue;
    ++out.counts.harvested;
    for (const int scale : config.scales) {
      jobs.push_back({&seeds[i], *harvest[i].pano, scale,
                      instance_id_for(seeds[i], *harvest[i].pano, scale)});
    }
  }
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < jobs.size(); ++i) {
    if (jobs[i - 1].id == jobs[i].id) {
      throw Error(Errc::InvalidArgument, "duplicate instance id " + jobs[i].id);
    }
  }

  struct CropOutcome {
    std::optional<InverseCrop> crop;
    std::optional<GateReport> report;
    std::optional<DropRecord> drop;
    bool screened = false;
  };
  std::vector<CropOutcome> outcomes(jobs.size());
  detail::parallel_for(jobs.size(), config.threads, [&](std::size_t i) {
    const auto& job = jobs[i];
    auto& o = outcomes[i];
    try {
      o.crop = inverse_crop(raster, source.transform, job.pano.location, job.scale);
    } catch (const Error& e) {
      o.drop = DropRecord{"crop", job.id, e.what()};
      return;
    }
    const auto gray = to_grayscale(o.crop->image);
    const auto sat = saturated_ratio(gray);
    if (validity_screen(gray) == GateVerdict::Reject) {
      o.drop = DropRecord{"screen", job.id,
                          "black ratio " + shortest(sat.black) + ", white ratio " +
                              shortest(sat.white) + " (limit 0.01)"};
      return;
    }
    o.screened = true;
    try {
      o.report = gate_cascade(gray, config.thresholds);
    } catch (const Error& e) {
      o.drop = DropRecord{"gate", job.id, e.what()};
      return;
    }
    if (o.report->verdict == GateVerdict::Reject) {
      o.drop = DropRecord{"gate", job.id, std::string(gate_stage_name(o.report->rejected_by))};
    }
  });

  std::vector<DedupCandidate> candidates;
  std::vector<std::size_t> candidate_job;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& o = outcomes[i];
    if (o.crop) ++out.counts.crops;
    if (o.screened) ++out.counts.screened;
    if (o.report) out.gate_reports.push_back({jobs[i].id, *o.report});
    if (o.drop) {
      out.drops.push_back(*o.drop);
      continue;
    }
    candidates.push_back({jobs[i].id, o.crop->footprint, jobs[i].pano.location, jobs[i].scale});
    candidate_job.push_back(i);
  }
  out.counts.gated = candidates.size();

  // Stage 3b: duplicate suppression over id-sorted survivors.
  const auto decisions = dedup_pass(candidates, {config.dedup_across_scales});
  std::vector<RetainedCrop> retained;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (decisions[c].duplicate_of) {
      out.drops.push_back({"dedup", candidates[c].id,
                           "duplicate of " + candidates[*decisions[c].duplicate_of].id});
      continue;
    }
    const auto& job = jobs[candidate_job[c]];
    auto& crop = *outcomes[candidate_job[c]].crop;
    retained.push_back({job.id, job.pano, crop.footprint, job.scale, std::move(crop.image)});
  }
  out.counts.deduped = retained.size();

  // Stage 4: tri-view alignment.
  auto aligned = align_triples(provider, retained, source, store, config.threads);
  out.instances = std::move(aligned.instances);
  out.counts.manifest = out.instances.size();
  out.counts.fetch_drops = aligned.drops.size();
  out.drops.insert(out.drops.end(), aligned.drops.begin(), aligned.drops.end());

  std::stable_sort(out.drops.begin(), out.drops.end(),
                   [](const DropRecord& a, const DropRecord& b) {
                     const auto ra = stage_rank(a.stage), rb = stage_rank(b.stage);
                     return ra != rb ? ra < rb : a.id < b.id;
                   });
  return out;
}

}  // namespace geobridge
