#include "geobridge/objective.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "geobridge/error.hpp"

namespace geobridge {
namespace {

constexpr double kPairWeight = 1.0 / 3.0;

void check_aligned(const EmbeddingBatch& a, const EmbeddingBatch& b) {
  if (a.ids() != b.ids()) {
    throw Error(Errc::BatchMisaligned, std::string(view_name(a.view())) + " and " +
                                           std::string(view_name(b.view())) +
                                           " batches do not share row ids");
  }
  if (a.dim() != b.dim()) {
    throw Error(Errc::DimensionMismatch, std::string(view_name(a.view())) + " has D=" +
                                             std::to_string(a.dim()) + ", " +
                                             std::string(view_name(b.view())) + " has D=" +
                                             std::to_string(b.dim()));
  }
}

void check_view(const EmbeddingBatch& b, View expected) {
  if (b.view() != expected) {
    throw Error(Errc::InvalidArgument, "expected a " + std::string(view_name(expected)) +
                                           " batch, got " + std::string(view_name(b.view())));
  }
}

// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& s) {
  Matrix p(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    long double z = 0.0L;
    for (Eigen::Index j = 0; j < s.cols(); ++j) z += std::exp(static_cast<long double>(s(i, j) - m));
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      p(i, j) = static_cast<double>(std::exp(static_cast<long double>(s(i, j) - m)) / z);
    }
  }
  return p;
}

double pair_loss(const Matrix& s, bool symmetric) {
  if (!symmetric) return infonce_identity(s);
  const Matrix st = s.transpose();
  return 0.5 * (infonce_identity(s) + infonce_identity(st));
}

// dL/dS for identity targets.
Matrix pair_loss_grad(const Matrix& s, bool symmetric) {
  const auto b = static_cast<double>(s.rows());
  const Matrix eye = Matrix::Identity(s.rows(), s.cols());
  Matrix g = (softmax_rows(s) - eye) / b;
  if (symmetric) {
    const Matrix st = s.transpose();
    const Matrix gt = (softmax_rows(st) - eye) / b;
    g = 0.5 * (g + gt.transpose());
  }
  return g;
}

LossBreakdown combine(const std::array<double, kLossPairCount>& pair) {
  LossBreakdown out;
  out.pair = pair;
  out.image = (pair[0] + pair[1] + pair[2]) / 3.0;
  out.text = (pair[3] + pair[4] + pair[5]) / 3.0;
  out.total = out.image + out.text;
  return out;
}

std::array<Matrix, kViewCount> embed_all(const FeatureSet& features, const EncoderSet& encoders,
                                         std::array<Eigen::VectorXd, kViewCount>* norms) {
  std::array<Matrix, kViewCount> z;
  const Eigen::Index b = features[0].rows();
  for (std::size_t v = 0; v < kViewCount; ++v) {
    const Matrix& x = features[v];
    const Matrix& w = encoders[v].weight;
    if (x.rows() != b) {
      throw Error(Errc::BatchMisaligned, "feature batches differ in size");
    }
    if (w.cols() != x.cols()) {
      throw Error(Errc::DimensionMismatch, std::string(view_name(static_cast<View>(v))) +
                                               " encoder expects D_in=" +
                                               std::to_string(w.cols()) + ", features have " +
                                               std::to_string(x.cols()));
    }
    if (w.rows() != encoders[0].weight.rows()) {
      throw Error(Errc::DimensionMismatch, "encoders disagree on D_out");
    }
    const Matrix y = x * w.transpose();
    Eigen::VectorXd n = y.rowwise().norm();
    for (Eigen::Index i = 0; i < n.size(); ++i) {
      if (!(n(i) > 0.0) || !std::isfinite(n(i))) {
        throw Error(Errc::ZeroVector, std::string(view_name(static_cast<View>(v))) +
                                          " embedding of row " + std::to_string(i) +
                                          " has norm " + std::to_string(n(i)));
      }
    }
    z[v] = n.cwiseInverse().asDiagonal() * y;
    if (norms != nullptr) (*norms)[v] = std::move(n);
  }
  return z;
}

}  // namespace

std::string_view loss_pair_name(LossPair p) noexcept {
  switch (p) {
    case LossPair::DroneToSatellite: return "d->s";
    case LossPair::SatelliteToPanorama: return "s->p";
    case LossPair::PanoramaToDrone: return "p->d";
    case LossPair::TextToDrone: return "t->d";
    case LossPair::TextToPanorama: return "t->p";
    case LossPair::TextToSatellite: return "t->s";
  }
  return "unknown";
}

double infonce(const Matrix& scores, std::span<const std::size_t> targets) {
  const Eigen::Index b = scores.rows();
  if (static_cast<std::size_t>(b) != targets.size()) {
    throw Error(Errc::BadTarget, std::to_string(targets.size()) + " targets for " +
                                     std::to_string(b) + " rows");
  }
  if (b == 0) throw Error(Errc::InvalidArgument, "empty score matrix");
  long double sum = 0.0L;
  for (Eigen::Index i = 0; i < b; ++i) {
    const std::size_t y = targets[static_cast<std::size_t>(i)];
    if (y >= static_cast<std::size_t>(scores.cols())) {
      throw Error(Errc::BadTarget, "target " + std::to_string(y) + " of row " +
                                       std::to_string(i) + " is not a column of a " +
                                       std::to_string(scores.cols()) + "-column matrix");
    }
    const double m = scores.row(i).maxCoeff();
    long double z = 0.0L;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      z += std::exp(static_cast<long double>(scores(i, j)) - m);
    }
    // log z >= s_y - m since the target term is one of the summands.
    sum += std::log(z) - (static_cast<long double>(scores(i, static_cast<Eigen::Index>(y))) - m);
  }
  const double loss = static_cast<double>(sum / b);
  if (!std::isfinite(loss)) throw Error(Errc::InvalidArgument, "score matrix is not finite");
  return loss < 0.0 ? 0.0 : loss;
}

double infonce(const ScoreMatrix& scores, std::span<const std::size_t> targets) {
  return infonce(scores.values, targets);
}

double infonce_identity(const Matrix& scores) {
  if (scores.rows() != scores.cols()) {
    throw Error(Errc::BadTarget, "identity targets need a square score matrix");
  }
  std::vector<std::size_t> targets(static_cast<std::size_t>(scores.rows()));
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = i;
  return infonce(scores, targets);
}

double image_loss(const EmbeddingBatch& drone, const EmbeddingBatch& pano,
                  const EmbeddingBatch& sat, const Temperature& t, const LossOptions& options) {
  check_view(drone, View::Drone);
  check_view(pano, View::Panorama);
  check_view(sat, View::Satellite);
  check_aligned(drone, pano);
  check_aligned(drone, sat);
  const std::array<const EmbeddingBatch*, kViewCount> by_view = {&drone, &pano, &sat, nullptr};
  double sum = 0.0;
  for (std::size_t p = 0; p < 3; ++p) {
    const auto [q, g] = kLossPairs[p];
    const auto s = score_matrix(*by_view[view_index(q)], *by_view[view_index(g)],
                                options.temperature_for(p, t));
    sum += pair_loss(s.values, options.symmetric);
  }
  return sum / 3.0;
}

double text_loss(const EmbeddingBatch& text, const EmbeddingBatch& drone,
                 const EmbeddingBatch& pano, const EmbeddingBatch& sat, const Temperature& t,
                 const LossOptions& options) {
  check_view(text, View::Text);
  check_view(drone, View::Drone);
  check_view(pano, View::Panorama);
  check_view(sat, View::Satellite);
  check_aligned(text, drone);
  check_aligned(text, pano);
  check_aligned(text, sat);
  const std::array<const EmbeddingBatch*, kViewCount> by_view = {&drone, &pano, &sat, &text};
  double sum = 0.0;
  for (std::size_t p = 3; p < kLossPairCount; ++p) {
    const auto [q, g] = kLossPairs[p];
    const auto s = score_matrix(*by_view[view_index(q)], *by_view[view_index(g)],
                                options.temperature_for(p, t));
    sum += pair_loss(s.values, options.symmetric);
  }
  return sum / 3.0;
}

LossBreakdown total_loss(const EmbeddingBatch& drone, const EmbeddingBatch& pano,
                         const EmbeddingBatch& sat, const EmbeddingBatch& text,
                         const Temperature& t, const LossOptions& options) {
  check_view(drone, View::Drone);
  check_view(pano, View::Panorama);
  check_view(sat, View::Satellite);
  check_view(text, View::Text);
  check_aligned(drone, pano);
  check_aligned(drone, sat);
  check_aligned(drone, text);
  const std::array<const EmbeddingBatch*, kViewCount> by_view = {&drone, &pano, &sat, &text};
  std::array<double, kLossPairCount> pair{};
  for (std::size_t p = 0; p < kLossPairCount; ++p) {
    const auto [q, g] = kLossPairs[p];
    const auto s = score_matrix(*by_view[view_index(q)], *by_view[view_index(g)],
                                options.temperature_for(p, t));
    pair[p] = pair_loss(s.values, options.symmetric);
  }
  return combine(pair);
}

Matrix LinearEncoder::embed(const Matrix& features) const {
  if (weight.cols() != features.cols()) {
    throw Error(Errc::DimensionMismatch, "encoder expects D_in=" + std::to_string(weight.cols()) +
                                             ", features have " +
                                             std::to_string(features.cols()));
  }
  const Matrix y = features * weight.transpose();
  Matrix z(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double n = y.row(i).norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw Error(Errc::ZeroVector, "embedding of row " + std::to_string(i) + " has norm " +
                                        std::to_string(n));
    }
    z.row(i) = y.row(i) / n;
  }
  return z;
}

LossBreakdown encoder_loss(const FeatureSet& features, const EncoderSet& encoders,
                           const Temperature& t, const LossOptions& options) {
  const auto z = embed_all(features, encoders, nullptr);
  std::array<double, kLossPairCount> pair{};
  for (std::size_t p = 0; p < kLossPairCount; ++p) {
    const auto [q, g] = kLossPairs[p];
    const double tau = options.temperature_for(p, t).tau();
    const Matrix s = (z[view_index(q)] * z[view_index(g)].transpose()) / tau;
    pair[p] = pair_loss(s, options.symmetric);
  }
  return combine(pair);
}

LossGradients loss_gradients(const FeatureSet& features, const EncoderSet& encoders,
                             const Temperature& t, const LossOptions& options) {
  std::array<Eigen::VectorXd, kViewCount> norms;
  const auto z = embed_all(features, encoders, &norms);

  LossGradients out;
  std::array<Matrix, kViewCount> dz;
  for (std::size_t v = 0; v < kViewCount; ++v) dz[v] = Matrix::Zero(z[v].rows(), z[v].cols());

  std::array<double, kLossPairCount> pair{};
  for (std::size_t p = 0; p < kLossPairCount; ++p) {
    const std::size_t u = view_index(kLossPairs[p].query);
    const std::size_t v = view_index(kLossPairs[p].gallery);
    const double tau = options.temperature_for(p, t).tau();
    const Matrix s = (z[u] * z[v].transpose()) / tau;
    pair[p] = pair_loss(s, options.symmetric);

    const Matrix gs = kPairWeight * pair_loss_grad(s, options.symmetric);
    dz[u] += gs * z[v] / tau;
    dz[v] += gs.transpose() * z[u] / tau;
    // S = C / tau, so dS/dlog_tau = -S.
    const double dlog = -(gs.array() * s.array()).sum();
    if (options.pair_temperature[p]) {
      out.pair_log_tau[p] = dlog;
    } else {
      out.log_tau += dlog;
    }
  }
  out.loss = combine(pair);

  for (std::size_t v = 0; v < kViewCount; ++v) {
    // z = y/|y|  =>  dy = (dz - z <z, dz>) / |y|
    const Eigen::VectorXd proj = (z[v].array() * dz[v].array()).rowwise().sum();
    const Matrix dy =
        norms[v].cwiseInverse().asDiagonal() * (dz[v] - proj.asDiagonal() * z[v]);
    out.weight[v] = dy.transpose() * features[v];
    if (!out.weight[v].allFinite()) {
      throw Error(Errc::NonFiniteGradient,
                  std::string(view_name(static_cast<View>(v))) + " encoder gradient is not finite");
    }
  }
  if (!std::isfinite(out.log_tau)) {
    throw Error(Errc::NonFiniteGradient, "log_tau gradient is not finite");
  }
  for (std::size_t p = 0; p < kLossPairCount; ++p) {
    if (!std::isfinite(out.pair_log_tau[p])) {
      throw Error(Errc::NonFiniteGradient, "log_tau gradient of pair " +
                                               std::string(loss_pair_name(static_cast<LossPair>(p))) +
                                               " is not finite");
    }
  }
  return out;
}

}  // namespace geobridge
