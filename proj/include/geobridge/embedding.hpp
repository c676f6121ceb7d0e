#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace geobridge {

/// Row-major dynamic matrix used for all embedding math.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// View tags; the numeric values are the on-disk tag bytes.
enum class View : std::uint8_t { Drone = 0, Panorama = 1, Satellite = 2, Text = 3 };

inline constexpr std::size_t kViewCount = 4;
std::string_view view_name(View v) noexcept;
inline constexpr std::size_t view_index(View v) noexcept { return static_cast<std::size_t>(v); }

/// Tolerance on |norm - 1| for stored embeddings.
inline constexpr double kUnitNormTolerance = 1e-6;

/// A unit-norm vector.
class EmbeddingVector {
 public:
  /// Throws InvalidArgument unless `values` is unit-norm within tolerance.
  explicit EmbeddingVector(Eigen::VectorXd values);

  const Eigen::VectorXd& values() const noexcept { return values_; }
  Eigen::Index dim() const noexcept { return values_.size(); }

 private:
  Eigen::VectorXd values_;
};

/// v / |v|. Throws ZeroVector when v has no nonzero component.
EmbeddingVector l2_normalize(std::span<const double> v);

/// B unit-norm rows for one view, row i belonging to ids[i].
class EmbeddingBatch {
 public:
  /// Validates unit-norm rows and unique ids.
  EmbeddingBatch(View view, std::vector<std::uint64_t> ids, Matrix rows);

  /// Normalizes every row of `raw` first.
  static EmbeddingBatch from_raw(View view, std::vector<std::uint64_t> ids, const Matrix& raw);

  View view() const noexcept { return view_; }
  const std::vector<std::uint64_t>& ids() const noexcept { return ids_; }
  const Matrix& matrix() const noexcept { return rows_; }
  std::size_t size() const noexcept { return ids_.size(); }
  Eigen::Index dim() const noexcept { return rows_.cols(); }

  EmbeddingVector row(std::size_t i) const;

 private:
  View view_;
  std::vector<std::uint64_t> ids_;
  Matrix rows_;
};

/// Positive temperature stored as log(tau).
class Temperature {
 public:
  static constexpr double kInitialTau = 0.07;

  Temperature() : log_tau_(std::log(kInitialTau)) {}
  explicit Temperature(double log_tau);
  static Temperature from_tau(double tau);

  double log_tau() const noexcept { return log_tau_; }
  double tau() const noexcept { return std::exp(log_tau_); }

 private:
  double log_tau_;
};

struct ScoreMatrix {
  View query_view;
  View gallery_view;
  Matrix values;  ///< values(i, j) = <q_i, g_j> / tau
};

/// Throws DimensionMismatch when the batches differ in D.
ScoreMatrix score_matrix(const EmbeddingBatch& q, const EmbeddingBatch& g, const Temperature& t);

struct ScoredId {
  std::uint64_t id;
  double score;

  friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

/// k best gallery rows by cosine similarity, descending; equal scores are
/// ordered by ascending id. Throws KOutOfRange unless 1 <= k <= B.
std::vector<ScoredId> top_k(const EmbeddingVector& q, const EmbeddingBatch& g, std::size_t k);

}  // namespace geobridge
