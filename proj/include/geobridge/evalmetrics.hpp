#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geobridge/geodesy.hpp"

namespace geobridge {

struct GalleryItem {
  std::string id;
  std::optional<GeoPoint> location;
  std::optional<GroundFootprint> footprint;
};

using Gallery = std::vector<GalleryItem>;

/// One query's full ranking. `ranking` holds gallery indices, best first,
/// and must be a permutation of 0..N-1.
struct QueryJudgment {
  std::string query_id;
  std::vector<std::size_t> ranking;
  std::size_t ground_truth = 0;  ///< gallery index
  std::optional<GeoPoint> query_location;
};

/// Throws InvalidArgument unless the ranking is a permutation of the
/// gallery and the ground truth is a gallery index.
void validate_judgment(const QueryJudgment& j, std::size_t gallery_size);

/// 1-based rank of the ground truth.
std::size_t ground_truth_rank(const QueryJudgment& j);

/// Throws KOutOfRange unless 1 <= k <= ranking size.
int recall_at_k(const QueryJudgment& j, std::size_t k);

/// Mean of precision@r over the ranks r holding a relevant item, given
/// relevance flags in ranked order. 0 when nothing is relevant.
double average_precision(std::span<const bool> relevant_by_rank);

/// Single-relevant AP, 1/rank of the ground truth.
double average_precision(const QueryJudgment& j);

/// ceil(0.01 * n), at least 1.
std::size_t one_percent_depth(std::size_t gallery_size);
int recall_at_1pct(const QueryJudgment& j);

/// Whether the top-1 footprint contains the query's true location.
/// Throws MissingFootprint or MissingLocation.
int hit(const QueryJudgment& j, const Gallery& gallery);

/// Whether any of the top-k items lies strictly closer than `meters`.
/// Throws MissingLocation or KOutOfRange.
int location_recall(const QueryJudgment& j, const Gallery& gallery, double meters, std::size_t k);

struct MetricConfig {
  std::vector<std::size_t> k_list{1, 5, 10};
  std::vector<double> distances_m{50.0};
  std::size_t location_k = 1;
  /// Hit and L@d need locations and footprints; off for id-only galleries.
  bool geo_metrics = true;

  /// Throws InvalidArgument.
  void validate() const;
};

struct MetricReport {
  std::size_t queries = 0;
  std::size_t gallery_size = 0;
  std::vector<std::pair<std::size_t, double>> recall;  ///< (k, R@k) in config order
  double recall_1pct = 0.0;
  double ap = 0.0;
  std::optional<double> hit;
  std::vector<std::pair<double, double>> location;  ///< (d, L@d)
};

/// Order-independent reduction of per-query metrics.
class MetricAccumulator {
 public:
  MetricAccumulator(const Gallery& gallery, MetricConfig config);

  void add(const QueryJudgment& j);
  std::size_t count() const noexcept { return count_; }
  /// Throws EmptyQuerySet.
  MetricReport report() const;

 private:
  const Gallery& gallery_;
  MetricConfig config_;
  std::vector<std::size_t> effective_k_;
  std::size_t count_ = 0;
  std::vector<std::size_t> recall_hits_;
  std::size_t pct_hits_ = 0;
  std::vector<double> ap_values_;
  std::size_t hit_count_ = 0;
  std::vector<std::size_t> location_hits_;
};

/// k values larger than the gallery are clamped to its size.
MetricReport aggregate(std::span<const QueryJudgment> judgments, const Gallery& gallery,
                       const MetricConfig& config = {});

nlohmann::ordered_json metric_report_json(const MetricReport& r);
std::string metric_report_table(const MetricReport& r);

/// Short labels used as JSON keys and table rows: "R@5", "R@1%", "L@50".
std::string recall_label(std::size_t k);
std::string location_label(double meters);

}  // namespace geobridge
