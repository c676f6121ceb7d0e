#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "geobridge/embedding.hpp"

namespace geobridge {

/// The six ordered score matrices of the objective, rows as queries:
/// three image pairs (d->s, s->p, p->d) then text->{d, p, s}.
enum class LossPair : std::size_t {
  DroneToSatellite = 0,
  SatelliteToPanorama,
  PanoramaToDrone,
  TextToDrone,
  TextToPanorama,
  TextToSatellite,
};

inline constexpr std::size_t kLossPairCount = 6;

struct PairViews {
  View query;
  View gallery;
};

inline constexpr std::array<PairViews, kLossPairCount> kLossPairs = {{
    {View::Drone, View::Satellite},
    {View::Satellite, View::Panorama},
    {View::Panorama, View::Drone},
    {View::Text, View::Drone},
    {View::Text, View::Panorama},
    {View::Text, View::Satellite},
}};

std::string_view loss_pair_name(LossPair p) noexcept;

struct LossOptions {
  /// Average each pair's InfoNCE over both query directions.
  bool symmetric = false;
  /// Per-pair temperature; unset pairs use the shared one.
  std::array<std::optional<Temperature>, kLossPairCount> pair_temperature{};

  const Temperature& temperature_for(std::size_t pair, const Temperature& shared) const {
    return pair_temperature[pair] ? *pair_temperature[pair] : shared;
  }
};

struct LossBreakdown {
  std::array<double, kLossPairCount> pair{};
  double image = 0.0;
  double text = 0.0;
  double total = 0.0;

  double operator[](LossPair p) const { return pair[static_cast<std::size_t>(p)]; }
};

/// Mean negative log-softmax of the target column of every row, with
/// per-row max subtraction. Throws BadTarget for an invalid target.
double infonce(const Matrix& scores, std::span<const std::size_t> targets);
double infonce(const ScoreMatrix& scores, std::span<const std::size_t> targets);

/// infonce with targets y_i = i.
double infonce_identity(const Matrix& scores);

/// Mean over (d->s, s->p, p->d). Throws BatchMisaligned if ids differ.
double image_loss(const EmbeddingBatch& drone, const EmbeddingBatch& pano,
                  const EmbeddingBatch& sat, const Temperature& t, const LossOptions& options = {});

/// Mean over text->{d, p, s}.
double text_loss(const EmbeddingBatch& text, const EmbeddingBatch& drone,
                 const EmbeddingBatch& pano, const EmbeddingBatch& sat, const Temperature& t,
                 const LossOptions& options = {});

LossBreakdown total_loss(const EmbeddingBatch& drone, const EmbeddingBatch& pano,
                         const EmbeddingBatch& sat, const EmbeddingBatch& text,
                         const Temperature& t, const LossOptions& options = {});

/// Linear map followed by row normalization; weight is D_out x D_in.
struct LinearEncoder {
  Matrix weight;

  /// Rows of `features` (B x D_in) mapped to unit-norm embeddings.
  Matrix embed(const Matrix& features) const;
};

/// Indexed by view_index(View).
using EncoderSet = std::array<LinearEncoder, kViewCount>;
using FeatureSet = std::array<Matrix, kViewCount>;

/// Loss of the four encoders applied to aligned raw features.
LossBreakdown encoder_loss(const FeatureSet& features, const EncoderSet& encoders,
                           const Temperature& t, const LossOptions& options = {});

struct LossGradients {
  LossBreakdown loss;
  std::array<Matrix, kViewCount> weight;  ///< dL_total / dW_v
  double log_tau = 0.0;                   ///< shared temperature
  std::array<double, kLossPairCount> pair_log_tau{};  ///< overridden pairs only
};

/// Analytic gradient of L_total through scoring, normalization and the
/// linear encoders. Throws NonFiniteGradient on a numerical fault.
LossGradients loss_gradients(const FeatureSet& features, const EncoderSet& encoders,
                             const Temperature& t, const LossOptions& options = {});

}  // namespace geobridge
