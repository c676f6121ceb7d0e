#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "geobridge/objective.hpp"

namespace geobridge {

/// Small deterministic RNG wrapper. Normal draws use Box-Muller so the
/// stream is identical across standard libraries.
class ToyRng {
 public:
  explicit ToyRng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  ///< [0, 1)
  double normal();
  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev = 1.0);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct TrainConfig {
  std::size_t batch = 32;
  std::size_t dim = 16;  ///< latent, input and embedding dimension
  double learning_rate = 0.25;
  std::size_t steps = 200;
  std::uint64_t seed = 17;
  bool learn_temperature = true;
  double noise = 0.1;

  /// Throws InvalidArgument.
  void validate() const;
};

/// Aligned quadruples from a shared latent: x_v = A_v h + noise * e, with
/// h, e standard normal and A_v an invertible view-specific distortion.
class SyntheticGenerator {
 public:
  SyntheticGenerator(std::size_t dim, double noise, ToyRng& rng);

  FeatureSet sample(std::size_t n, ToyRng& rng) const;
  const std::array<Matrix, kViewCount>& distortions() const noexcept { return mix_; }

 private:
  std::size_t dim_;
  double noise_;
  std::array<Matrix, kViewCount> mix_;
};

struct TraceRow {
  std::size_t step;
  double image;
  double text;
  double total;
  double tau;
};

struct TrainResult {
  EncoderSet initial;
  EncoderSet encoders;
  Temperature temperature;
  std::vector<TraceRow> trace;  ///< steps + 1 rows, row k after k updates
};

/// Plain gradient descent on L_total. The trace is evaluated on a fixed
/// monitor batch. Throws Diverged when the loss or a gradient goes
/// non-finite.
TrainResult train_toy(const TrainConfig& config, const SyntheticGenerator& generator, ToyRng& rng);

/// Builds the generator from config.seed and trains.
TrainResult train_toy(const TrainConfig& config);

/// Held-out probe drawn from the same distortions as train_toy(config).
FeatureSet toy_probe(const TrainConfig& config, std::size_t n);

/// R@1 of every ordered image-view direction (q != g), indexed [q][g].
using DirectionRecall = std::array<std::array<double, 3>, 3>;
DirectionRecall cross_view_recall_at_1(const EncoderSet& encoders, const FeatureSet& features);

}  // namespace geobridge
