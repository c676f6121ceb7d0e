#include "geobridge/toy.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include <Eigen/QR>

#include "geobridge/error.hpp"

namespace geobridge {
namespace {

// Seed offsets for the independent streams derived from one config seed.
constexpr std::uint64_t kProbeStream = 0x9e3779b97f4a7c15ULL;

void check_finite(const LossBreakdown& l, std::size_t step) {
  if (!std::isfinite(l.total)) {
    throw Error(Errc::Diverged, "loss is not finite at step " + std::to_string(step));
  }
}

}  // namespace

double ToyRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double ToyRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

Matrix ToyRng::normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = stddev * normal();
  }
  return m;
}

void TrainConfig::validate() const {
  if (batch < 2) throw Error(Errc::InvalidArgument, "batch must be >= 2");
  if (dim < 1) throw Error(Errc::InvalidArgument, "dim must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(Errc::InvalidArgument, "learning rate must be finite and positive");
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw Error(Errc::InvalidArgument, "noise must be finite and >= 0");
  }
}

SyntheticGenerator::SyntheticGenerator(std::size_t dim, double noise, ToyRng& rng)
    : dim_(dim), noise_(noise) {
  const auto d = static_cast<Eigen::Index>(dim);
  for (auto& a : mix_) {
    // Random rotation times a diagonal in [0.5, 1.5]: invertible by construction.
    const Eigen::MatrixXd g = rng.normal_matrix(d, d);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    Eigen::VectorXd s(d);
    for (Eigen::Index i = 0; i < d; ++i) s(i) = 0.5 + rng.uniform();
    a = q * s.asDiagonal();
  }
}

FeatureSet SyntheticGenerator::sample(std::size_t n, ToyRng& rng) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  const Matrix h = rng.normal_matrix(static_cast<Eigen::Index>(n), d);
  FeatureSet x;
  for (std::size_t v = 0; v < kViewCount; ++v) {
    x[v] = h * mix_[v].transpose() + rng.normal_matrix(static_cast<Eigen::Index>(n), d, noise_);
  }
  return x;
}

TrainResult train_toy(const TrainConfig& config, const SyntheticGenerator& generator, ToyRng& rng) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.dim);
  TrainResult result;
  for (auto& enc : result.initial) {
    enc.weight = rng.normal_matrix(d, d, 1.0 / std::sqrt(static_cast<double>(config.dim)));
  }
  result.encoders = result.initial;
  const FeatureSet monitor = generator.sample(config.batch, rng);

  auto record = [&](std::size_t step) {
    LossBreakdown l;
    try {
      l = encoder_loss(monitor, result.encoders, result.temperature);
    } catch (const Error& e) {
      throw Error(Errc::Diverged, "step " + std::to_string(step) + ": " + e.detail());
    }
    check_finite(l, step);
    result.trace.push_back({step, l.image, l.text, l.total, result.temperature.tau()});
  };

  record(0);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    const FeatureSet batch = generator.sample(config.batch, rng);
    LossGradients g;
    try {
      g = loss_gradients(batch, result.encoders, result.temperature);
    } catch (const Error& e) {
      throw Error(Errc::Diverged, "step " + std::to_string(step) + ": " + e.detail());
    }
    check_finite(g.loss, step);
    for (std::size_t v = 0; v < kViewCount; ++v) {
      result.encoders[v].weight -= config.learning_rate * g.weight[v];
    }
    if (config.learn_temperature) {
      const double next = result.temperature.log_tau() - config.learning_rate * g.log_tau;
      if (!std::isfinite(next) || !std::isfinite(std::exp(next)) || std::exp(next) <= 0.0) {
        throw Error(Errc::Diverged, "temperature left the representable range at step " +
                                        std::to_string(step));
      }
      result.temperature = Temperature(next);
    }
    record(step);
  }
  return result;
}

TrainResult train_toy(const TrainConfig& config) {
  config.validate();
  ToyRng rng(config.seed);
  const SyntheticGenerator generator(config.dim, config.noise, rng);
  return train_toy(config, generator, rng);
}

FeatureSet toy_probe(const TrainConfig& config, std::size_t n) {
  config.validate();
  ToyRng rng(config.seed);
  const SyntheticGenerator generator(config.dim, config.noise, rng);
  ToyRng probe_rng(config.seed ^ kProbeStream);
  return generator.sample(n, probe_rng);
}

DirectionRecall cross_view_recall_at_1(const EncoderSet& encoders, const FeatureSet& features) {
  const auto n = static_cast<std::size_t>(features[0].rows());
  if (n == 0) throw Error(Errc::InvalidArgument, "empty probe set");
  std::vector<std::uint64_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::uint64_t{0});
  std::array<Matrix, 3> z;
  for (std::size_t v = 0; v < 3; ++v) z[v] = encoders[v].embed(features[v]);

  DirectionRecall out{};
  for (std::size_t q = 0; q < 3; ++q) {
    for (std::size_t g = 0; g < 3; ++g) {
      if (q == g) continue;
      const EmbeddingBatch gallery(static_cast<View>(g), ids, z[g]);
      std::size_t hits = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const EmbeddingVector query(z[q].row(static_cast<Eigen::Index>(i)).transpose());
        if (top_k(query, gallery, 1).front().id == ids[i]) ++hits;
      }
      out[q][g] = static_cast<double>(hits) / static_cast<double>(n);
    }
  }
  return out;
}

}  // namespace geobridge
