#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "geobridge/raster.hpp"

namespace geobridge {

/// Floors and ceilings of the BH -> C -> UN quality cascade.
struct GateThresholds {
  double bh_lap_min = 50.0;         ///< Laplacian-variance floor
  double bh_std_min = 10.0;         ///< pixel standard-deviation floor
  double c_range_min = 60.0;        ///< (p1, p99) gray-level range floor
  double un_entropy_min = 4.0;      ///< histogram entropy floor, bits
  double un_sat_max = 0.05;         ///< max(black, white) ratio ceiling
  double un_noise_ratio_min = 0.05; ///< block-mean-variance-ratio floor

  /// Throws InvalidArgument unless every field is in its documented range.
  void validate() const;

  friend bool operator==(const GateThresholds&, const GateThresholds&) = default;
};

/// Parses flat `key = value` text. Blank lines and `#` comments are
/// ignored; keys must be the six field names. Missing keys keep defaults.
GateThresholds parse_thresholds(std::string_view text);
GateThresholds load_thresholds(const std::filesystem::path& path);

enum class GateVerdict { Pass, Reject };
enum class GateStage { None, BH, C, UN };

std::string_view gate_stage_name(GateStage stage) noexcept;

/// Statistics measured by the stages that ran. Values belonging to stages
/// after the firing one stay empty.
struct GateStats {
  std::optional<double> laplacian_variance;
  std::optional<double> pixel_variance;
  std::optional<double> contrast_range;
  std::optional<double> entropy;
  std::optional<double> black_ratio;
  std::optional<double> white_ratio;
  std::optional<double> noise_ratio;

  friend bool operator==(const GateStats&, const GateStats&) = default;
};

struct GateReport {
  GateVerdict verdict = GateVerdict::Pass;
  GateStage rejected_by = GateStage::None;
  GateStats stats;

  friend bool operator==(const GateReport&, const GateReport&) = default;
};

/// Block size used by the UN gate's noise statistic.
inline constexpr int kNoiseBlock = 8;

GateVerdict bh_gate(const GrayImage& g, const GateThresholds& t);
GateVerdict c_gate(const GrayImage& g, const GateThresholds& t);
GateVerdict un_gate(const GrayImage& g, const GateThresholds& t);

/// Runs BH, C, UN in order and stops at the first rejection.
GateReport gate_cascade(const GrayImage& g, const GateThresholds& t);

/// One-line JSON object with a fixed key order; `id` is echoed first.
std::string gate_report_json(const GateReport& report, std::string_view id);

}  // namespace geobridge
