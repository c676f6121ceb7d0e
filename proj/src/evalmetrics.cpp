#include "geobridge/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "geobridge/error.hpp"
#include "text_format.hpp"

namespace geobridge {
namespace {

const GalleryItem& item_at(const QueryJudgment& j, const Gallery& gallery, std::size_t rank0) {
  const std::size_t idx = j.ranking[rank0];
  if (idx >= gallery.size()) {
    throw Error(Errc::InvalidArgument, "query " + j.query_id + " ranks gallery index " +
                                           std::to_string(idx) + " of " +
                                           std::to_string(gallery.size()));
  }
  return gallery[idx];
}

void check_k(std::size_t k, std::size_t n) {
  if (k < 1 || k > n) {
    throw Error(Errc::KOutOfRange,
                "k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
}

// Sum in ascending order so the mean does not depend on insertion order.
double ordered_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  long double sum = 0.0L;
  for (double v : values) sum += v;
  return static_cast<double>(sum / static_cast<long double>(values.size()));
}

double rate(std::size_t hits, std::size_t n) {
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

void validate_judgment(const QueryJudgment& j, std::size_t gallery_size) {
  if (j.ranking.size() != gallery_size) {
    throw Error(Errc::InvalidArgument, "query " + j.query_id + " ranks " +
                                           std::to_string(j.ranking.size()) + " of " +
                                           std::to_string(gallery_size) + " gallery items");
  }
  std::vector<bool> seen(gallery_size, false);
  for (std::size_t idx : j.ranking) {
    if (idx >= gallery_size || seen[idx]) {
      throw Error(Errc::InvalidArgument,
                  "ranking of query " + j.query_id + " is not a permutation of the gallery");
    }
    seen[idx] = true;
  }
  if (j.ground_truth >= gallery_size) {
    throw Error(Errc::InvalidArgument, "ground truth of query " + j.query_id +
                                           " is not in the gallery");
  }
}

std::size_t ground_truth_rank(const QueryJudgment& j) {
  const auto it = std::find(j.ranking.begin(), j.ranking.end(), j.ground_truth);
  if (it == j.ranking.end()) {
    throw Error(Errc::InvalidArgument, "ground truth of query " + j.query_id +
                                           " does not appear in its ranking");
  }
  return static_cast<std::size_t>(it - j.ranking.begin()) + 1;
}

int recall_at_k(const QueryJudgment& j, std::size_t k) {
  check_k(k, j.ranking.size());
  return ground_truth_rank(j) <= k ? 1 : 0;
}

double average_precision(std::span<const bool> relevant_by_rank) {
  std::size_t found = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < relevant_by_rank.size(); ++r) {
    if (!relevant_by_rank[r]) continue;
    ++found;
    sum += static_cast<double>(found) / static_cast<double>(r + 1);
  }
  return found == 0 ? 0.0 : sum / static_cast<double>(found);
}

double average_precision(const QueryJudgment& j) {
  return 1.0 / static_cast<double>(ground_truth_rank(j));
}

std::size_t one_percent_depth(std::size_t gallery_size) {
  // ceil(n / 100) in integers.
  return std::max<std::size_t>(1, (gallery_size + 99) / 100);
}

int recall_at_1pct(const QueryJudgment& j) {
  if (j.ranking.empty()) throw Error(Errc::InvalidArgument, "empty gallery");
  return ground_truth_rank(j) <= one_percent_depth(j.ranking.size()) ? 1 : 0;
}

int hit(const QueryJudgment& j, const Gallery& gallery) {
  if (j.ranking.empty()) throw Error(Errc::InvalidArgument, "empty gallery");
  const GalleryItem& top = item_at(j, gallery, 0);
  if (!top.footprint) {
    throw Error(Errc::MissingFootprint, "top-1 item " + top.id + " of query " + j.query_id +
                                            " has no footprint");
  }
  if (!j.query_location) {
    throw Error(Errc::MissingLocation, "query " + j.query_id + " has no true location");
  }
  return contains(*top.footprint, *j.query_location) ? 1 : 0;
}

int location_recall(const QueryJudgment& j, const Gallery& gallery, double meters, std::size_t k) {
  check_k(k, j.ranking.size());
  if (!j.query_location) {
    throw Error(Errc::MissingLocation, "query " + j.query_id + " has no true location");
  }
  int found = 0;
  for (std::size_t r = 0; r < k; ++r) {
    const GalleryItem& item = item_at(j, gallery, r);
    if (!item.location) {
      throw Error(Errc::MissingLocation, "gallery item " + item.id + " has no location");
    }
    if (haversine_distance(*item.location, *j.query_location) < meters) found = 1;
  }
  return found;
}

void MetricConfig::validate() const {
  for (std::size_t k : k_list) {
    if (k < 1) throw Error(Errc::InvalidArgument, "k values must be >= 1");
  }
  for (double d : distances_m) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw Error(Errc::InvalidArgument, "distance thresholds must be finite and positive");
    }
  }
  if (location_k < 1) throw Error(Errc::InvalidArgument, "location k must be >= 1");
}

MetricAccumulator::MetricAccumulator(const Gallery& gallery, MetricConfig config)
    : gallery_(gallery), config_(std::move(config)) {
  config_.validate();
  if (gallery_.empty()) throw Error(Errc::InvalidArgument, "empty gallery");
  for (std::size_t k : config_.k_list) effective_k_.push_back(std::min(k, gallery_.size()));
  recall_hits_.assign(config_.k_list.size(), 0);
  location_hits_.assign(config_.distances_m.size(), 0);
}

void MetricAccumulator::add(const QueryJudgment& j) {
  validate_judgment(j, gallery_.size());
  const std::size_t rank = ground_truth_rank(j);
  for (std::size_t i = 0; i < effective_k_.size(); ++i) {
    if (rank <= effective_k_[i]) ++recall_hits_[i];
  }
  pct_hits_ += static_cast<std::size_t>(recall_at_1pct(j));
  ap_values_.push_back(average_precision(j));
  if (config_.geo_metrics) {
    hit_count_ += static_cast<std::size_t>(hit(j, gallery_));
    const std::size_t lk = std::min(config_.location_k, gallery_.size());
    for (std::size_t i = 0; i < config_.distances_m.size(); ++i) {
      location_hits_[i] +=
          static_cast<std::size_t>(location_recall(j, gallery_, config_.distances_m[i], lk));
    }
  }
  ++count_;
}

MetricReport MetricAccumulator::report() const {
  if (count_ == 0) throw Error(Errc::EmptyQuerySet, "no judgments to aggregate");
  MetricReport r;
  r.queries = count_;
  r.gallery_size = gallery_.size();
  for (std::size_t i = 0; i < config_.k_list.size(); ++i) {
    r.recall.emplace_back(config_.k_list[i], rate(recall_hits_[i], count_));
  }
  r.recall_1pct = rate(pct_hits_, count_);
  r.ap = ordered_mean(ap_values_);
  if (config_.geo_metrics) {
    r.hit = rate(hit_count_, count_);
    for (std::size_t i = 0; i < config_.distances_m.size(); ++i) {
      r.location.emplace_back(config_.distances_m[i], rate(location_hits_[i], count_));
    }
  }
  return r;
}

MetricReport aggregate(std::span<const QueryJudgment> judgments, const Gallery& gallery,
                       const MetricConfig& config) {
  if (judgments.empty()) throw Error(Errc::EmptyQuerySet, "no judgments to aggregate");
  MetricAccumulator acc(gallery, config);
  for (const auto& j : judgments) acc.add(j);
  return acc.report();
}

std::string recall_label(std::size_t k) { return "R@" + std::to_string(k); }

std::string location_label(double meters) { return "L@" + detail::shortest(meters); }

nlohmann::ordered_json metric_report_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["queries"] = r.queries;
  j["gallery"] = r.gallery_size;
  for (const auto& [k, v] : r.recall) j[recall_label(k)] = v;
  j["R@1%"] = r.recall_1pct;
  j["AP"] = r.ap;
  if (r.hit) j["Hit"] = *r.hit;
  for (const auto& [d, v] : r.location) j[location_label(d)] = v;
  return j;
}

std::string metric_report_table(const MetricReport& r) {
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& [k, v] : r.recall) rows.emplace_back(recall_label(k), v);
  rows.emplace_back("R@1%", r.recall_1pct);
  rows.emplace_back("AP", r.ap);
  if (r.hit) rows.emplace_back("Hit", *r.hit);
  for (const auto& [d, v] : r.location) rows.emplace_back(location_label(d), v);

  std::size_t width = 6;
  for (const auto& row : rows) width = std::max(width, row.first.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "metric" << "  value\n";
  os << std::string(width, '-') << "  ------\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& [name, v] : rows) {
    os << std::left << std::setw(static_cast<int>(width)) << name << "  " << std::right
       << std::setw(6) << v * 100.0 << "\n";
  }
  os << "(" << r.queries << " queries, gallery " << r.gallery_size << ", values in %)\n";
  return os.str();
}

}  // namespace geobridge
