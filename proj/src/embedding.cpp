#include "geobridge/embedding.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_set>

#include "geobridge/error.hpp"

namespace geobridge {
namespace {

void check_unit(double norm, const std::string& what) {
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitNormTolerance) {
    throw Error(Errc::InvalidArgument,
                what + " has norm " + std::to_string(norm) + ", expected 1");
  }
}

}  // namespace

std::string_view view_name(View v) noexcept {
  switch (v) {
    case View::Drone: return "drone";
    case View::Panorama: return "panorama";
    case View::Satellite: return "satellite";
    case View::Text: return "text";
  }
  return "unknown";
}

EmbeddingVector::EmbeddingVector(Eigen::VectorXd values) : values_(std::move(values)) {
  if (values_.size() == 0) throw Error(Errc::InvalidArgument, "empty embedding");
  check_unit(values_.norm(), "embedding");
}

EmbeddingVector l2_normalize(std::span<const double> v) {
  const Eigen::Map<const Eigen::VectorXd> raw(v.data(), static_cast<Eigen::Index>(v.size()));
  if (v.empty() || (raw.array() == 0.0).all()) {
    throw Error(Errc::ZeroVector, "cannot normalize a zero vector");
  }
  if (!raw.allFinite()) throw Error(Errc::InvalidArgument, "vector has non-finite entries");
  // Scale by the max magnitude first so tiny or huge inputs do not
  // underflow or overflow the squared norm.
  const double scale = raw.cwiseAbs().maxCoeff();
  Eigen::VectorXd scaled = raw / scale;
  scaled /= scaled.norm();
  return EmbeddingVector(std::move(scaled));
}

EmbeddingBatch::EmbeddingBatch(View view, std::vector<std::uint64_t> ids, Matrix rows)
    : view_(view), ids_(std::move(ids)), rows_(std::move(rows)) {
  if (static_cast<std::size_t>(rows_.rows()) != ids_.size()) {
    throw Error(Errc::DimensionMismatch, std::to_string(ids_.size()) + " ids for " +
                                             std::to_string(rows_.rows()) + " rows");
  }
  if (rows_.cols() < 1) throw Error(Errc::InvalidArgument, "embedding dimension must be >= 1");
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!seen.insert(ids_[i]).second) {
      throw Error(Errc::InvalidArgument, "duplicate id " + std::to_string(ids_[i]));
    }
    check_unit(rows_.row(static_cast<Eigen::Index>(i)).norm(),
               "row " + std::to_string(i) + " (id " + std::to_string(ids_[i]) + ")");
  }
}

EmbeddingBatch EmbeddingBatch::from_raw(View view, std::vector<std::uint64_t> ids,
                                        const Matrix& raw) {
  Matrix rows(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const Eigen::VectorXd r = raw.row(i).transpose();
    rows.row(i) = l2_normalize(std::span<const double>(r.data(), r.size())).values().transpose();
  }
  return EmbeddingBatch(view, std::move(ids), std::move(rows));
}

EmbeddingVector EmbeddingBatch::row(std::size_t i) const {
  return EmbeddingVector(rows_.row(static_cast<Eigen::Index>(i)).transpose());
}

Temperature::Temperature(double log_tau) : log_tau_(log_tau) {
  if (!std::isfinite(log_tau) || !std::isfinite(std::exp(log_tau)) || std::exp(log_tau) <= 0.0) {
    throw Error(Errc::InvalidArgument, "log_tau must give a finite positive tau");
  }
}

Temperature Temperature::from_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(Errc::InvalidArgument, "tau must be finite and positive");
  }
  return Temperature(std::log(tau));
}

ScoreMatrix score_matrix(const EmbeddingBatch& q, const EmbeddingBatch& g, const Temperature& t) {
  if (q.dim() != g.dim()) {
    throw Error(Errc::DimensionMismatch, "query D=" + std::to_string(q.dim()) +
                                             " but gallery D=" + std::to_string(g.dim()));
  }
  return {q.view(), g.view(), (q.matrix() * g.matrix().transpose()) / t.tau()};
}

std::vector<ScoredId> top_k(const EmbeddingVector& q, const EmbeddingBatch& g, std::size_t k) {
  if (k < 1 || k > g.size()) {
    throw Error(Errc::KOutOfRange, "k=" + std::to_string(k) + " outside [1, " +
                                       std::to_string(g.size()) + "]");
  }
  if (q.dim() != g.dim()) {
    throw Error(Errc::DimensionMismatch, "query D=" + std::to_string(q.dim()) +
                                             " but gallery D=" + std::to_string(g.dim()));
  }
  const Eigen::VectorXd scores = g.matrix() * q.values();
  std::vector<ScoredId> all(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    all[i] = {g.ids()[i], scores(static_cast<Eigen::Index>(i))};
  }
  const auto better = [](const ScoredId& a, const ScoredId& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), better);
  all.resize(k);
  return all;
}

}  // namespace geobridge
