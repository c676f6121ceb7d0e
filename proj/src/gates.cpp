#include "geobridge/gates.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "geobridge/error.hpp"

namespace geobridge {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view key, std::string_view text, int line) {
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(value)) {
    throw Error(Errc::FormatError, "thresholds line " + std::to_string(line) +
                                       ": value for '" + std::string(key) +
                                       "' is not a finite number: '" +
                                       std::string(text) + "'");
  }
  return value;
}

void require_side(const GrayImage& g, int side, const char* gate) {
  if (g.width() < side || g.height() < side) {
    throw Error(Errc::ImageTooSmall,
                std::string(gate) + " needs at least " + std::to_string(side) + "x" +
                    std::to_string(side) + " pixels, got " + std::to_string(g.width()) +
                    "x" + std::to_string(g.height()));
  }
}

struct BhMeasure {
  double lap;
  double var;
};

BhMeasure measure_bh(const GrayImage& g) {
  require_side(g, 3, "BH gate");
  return {laplacian_variance(g), pixel_variance(g)};
}

bool bh_rejects(const BhMeasure& m, const GateThresholds& t) {
  return m.lap < t.bh_lap_min || std::sqrt(m.var) < t.bh_std_min;
}

struct UnMeasure {
  double entropy;
  SaturationRatios sat;
  double noise;
};

UnMeasure measure_un(const GrayImage& g) {
  require_side(g, kNoiseBlock, "UN gate");
  return {histogram_entropy(g), saturated_ratio(g),
          block_mean_variance_ratio(g, kNoiseBlock)};
}

bool un_rejects(const UnMeasure& m, const GateThresholds& t) {
  return m.entropy < t.un_entropy_min ||
         std::max(m.sat.black, m.sat.white) > t.un_sat_max ||
         m.noise < t.un_noise_ratio_min;
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

void GateThresholds::validate() const {
  const std::pair<const char*, double> fields[] = {
      {"bh_lap_min", bh_lap_min},         {"bh_std_min", bh_std_min},
      {"c_range_min", c_range_min},       {"un_entropy_min", un_entropy_min},
      {"un_sat_max", un_sat_max},         {"un_noise_ratio_min", un_noise_ratio_min}};
  for (const auto& [name, value] : fields) {
    if (!std::isfinite(value) || value < 0.0) {
      throw Error(Errc::InvalidArgument,
                  std::string(name) + " must be finite and non-negative");
    }
  }
  if (un_entropy_min > 8.0) {
    throw Error(Errc::InvalidArgument, "un_entropy_min must be <= 8 bits");
  }
  if (un_sat_max > 1.0 || un_noise_ratio_min > 1.0) {
    throw Error(Errc::InvalidArgument, "ratio thresholds must lie in [0, 1]");
  }
}

GateThresholds parse_thresholds(std::string_view text) {
  GateThresholds t;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::FormatError,
                  "thresholds line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    const double value = parse_double(key, trim(line.substr(eq + 1)), line_no);
    if (key == "bh_lap_min") t.bh_lap_min = value;
    else if (key == "bh_std_min") t.bh_std_min = value;
    else if (key == "c_range_min") t.c_range_min = value;
    else if (key == "un_entropy_min") t.un_entropy_min = value;
    else if (key == "un_sat_max") t.un_sat_max = value;
    else if (key == "un_noise_ratio_min") t.un_noise_ratio_min = value;
    else {
      throw Error(Errc::FormatError, "thresholds line " + std::to_string(line_no) +
                                         ": unknown key '" + std::string(key) + "'");
    }
  }
  t.validate();
  return t;
}

GateThresholds load_thresholds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open thresholds file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_thresholds(buffer.str());
}

std::string_view gate_stage_name(GateStage stage) noexcept {
  switch (stage) {
    case GateStage::None: return "none";
    case GateStage::BH: return "BH";
    case GateStage::C: return "C";
    case GateStage::UN: return "UN";
  }
  return "none";
}

GateVerdict bh_gate(const GrayImage& g, const GateThresholds& t) {
  return bh_rejects(measure_bh(g), t) ? GateVerdict::Reject : GateVerdict::Pass;
}

GateVerdict c_gate(const GrayImage& g, const GateThresholds& t) {
  return contrast_range(g, 1.0, 99.0) < t.c_range_min ? GateVerdict::Reject
                                                       : GateVerdict::Pass;
}

GateVerdict un_gate(const GrayImage& g, const GateThresholds& t) {
  return un_rejects(measure_un(g), t) ? GateVerdict::Reject : GateVerdict::Pass;
}

GateReport gate_cascade(const GrayImage& g, const GateThresholds& t) {
  require_side(g, kNoiseBlock, "gate cascade");
  GateReport report;
  auto reject = [&](GateStage stage) {
    report.verdict = GateVerdict::Reject;
    report.rejected_by = stage;
    return report;
  };

  const auto bh = measure_bh(g);
  report.stats.laplacian_variance = bh.lap;
  report.stats.pixel_variance = bh.var;
  if (bh_rejects(bh, t)) return reject(GateStage::BH);

  const double range = contrast_range(g, 1.0, 99.0);
  report.stats.contrast_range = range;
  if (range < t.c_range_min) return reject(GateStage::C);

  const auto un = measure_un(g);
  report.stats.entropy = un.entropy;
  report.stats.black_ratio = un.sat.black;
  report.stats.white_ratio = un.sat.white;
  report.stats.noise_ratio = un.noise;
  if (un_rejects(un, t)) return reject(GateStage::UN);
  return report;
}

std::string gate_report_json(const GateReport& report, std::string_view id) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["verdict"] = report.verdict == GateVerdict::Pass ? "pass" : "rejected";
  j["rejected_by"] = gate_stage_name(report.rejected_by);
  nlohmann::ordered_json stats;
  stats["laplacian_variance"] = optional_json(report.stats.laplacian_variance);
  stats["pixel_variance"] = optional_json(report.stats.pixel_variance);
  stats["contrast_range"] = optional_json(report.stats.contrast_range);
  stats["entropy"] = optional_json(report.stats.entropy);
  stats["black_ratio"] = optional_json(report.stats.black_ratio);
  stats["white_ratio"] = optional_json(report.stats.white_ratio);
  stats["noise_ratio"] = optional_json(report.stats.noise_ratio);
  j["stats"] = std::move(stats);
  return j.dump();
}

}  // namespace geobridge
