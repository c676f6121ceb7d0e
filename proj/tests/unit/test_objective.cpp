#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "geobridge/error.hpp"
#include "geobridge/objective.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace geobridge;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::InvalidArgument;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

std::vector<std::uint64_t> iota_ids(std::size_t n) {
  std::vector<std::uint64_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

EmbeddingBatch batch(View v, const Matrix& raw) {
  return EmbeddingBatch::from_raw(v, iota_ids(static_cast<std::size_t>(raw.rows())), raw);
}

oracle::Mat to_rows(const Matrix& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(m(i, j));
  }
  return out;
}

Matrix permute_rows(const Matrix& m, const std::vector<Eigen::Index>& perm) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) = m.row(perm[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

TEST_CASE("infonce closed forms") {
  Matrix one(1, 1);
  one << 3.7;
  CHECK(infonce_identity(one) == 0.0);

  Matrix two(2, 2);
  two << 1, 0, 0, 1;
  CHECK(infonce_identity(two) == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-15));
  CHECK(infonce_identity(two) == doctest::Approx(0.313262).epsilon(1e-6));

  for (Eigen::Index b = 2; b <= 64; ++b) {
    const Matrix flat = Matrix::Constant(b, b, -2.5);
    CHECK(std::abs(infonce_identity(flat) - std::log(static_cast<double>(b))) <= 1e-12);
    std::vector<std::size_t> targets(static_cast<std::size_t>(b), static_cast<std::size_t>(b - 1));
    CHECK(std::abs(infonce(flat, targets) - std::log(static_cast<double>(b))) <= 1e-12);
  }
}

TEST_CASE("infonce targets and stability") {
  Matrix s(2, 3);
  s << 1, 2, 3, 4, 5, 6;
  const std::vector<std::size_t> short_targets = {0};
  CHECK(code_of([&] { infonce(s, short_targets); }) == Errc::BadTarget);
  const std::vector<std::size_t> out_of_range = {0, 3};
  CHECK(code_of([&] { infonce(s, out_of_range); }) == Errc::BadTarget);

  Matrix huge(2, 2);
  huge << 1000, 0, 0, 1000;
  CHECK(infonce_identity(huge) == 0.0);
  huge << 0, 1000, 1000, 0;
  CHECK(infonce_identity(huge) == doctest::Approx(1000.0));
}

TEST_CASE("infonce is row-shift invariant and matches the scalar oracle") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index b = 2 + t % 9;
    const Matrix s = random_matrix(b, b + t % 3, rng, 2.0);
    std::vector<std::size_t> y(static_cast<std::size_t>(b));
    for (auto& v : y) v = static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(s.cols()));
    Matrix shifted = s;
    for (Eigen::Index i = 0; i < b; ++i) shifted.row(i).array() += shift(rng);
    CHECK(std::abs(infonce(shifted, y) - infonce(s, y)) <= 1e-10);
    CHECK(infonce(s, y) == doctest::Approx(oracle::infonce(to_rows(s), y)).epsilon(1e-12));
    CHECK(infonce(s, y) >= 0.0);
  }
}

TEST_CASE("image and text loss examples") {
  Matrix ortho(2, 2);
  ortho << 1, 0, 0, 1;
  const auto d = batch(View::Drone, ortho), p = batch(View::Panorama, ortho),
             s = batch(View::Satellite, ortho), t = batch(View::Text, ortho);
  const auto tau1 = Temperature::from_tau(1.0);
  const double b2 = std::log(1.0 + std::exp(-1.0));
  CHECK(image_loss(d, p, s, tau1) == doctest::Approx(b2).epsilon(1e-15));
  CHECK(text_loss(t, d, p, s, tau1) == doctest::Approx(b2).epsilon(1e-15));

  const auto br = total_loss(d, p, s, t, tau1);
  for (double v : br.pair) CHECK(v == doctest::Approx(b2).epsilon(1e-15));
  CHECK(br.image == br.text);
  CHECK(br.total == 2.0 * br.image);

  Matrix single(1, 3);
  single << 0.2, -1, 4;
  const auto d1 = batch(View::Drone, single), p1 = batch(View::Panorama, single),
             s1 = batch(View::Satellite, single), t1 = batch(View::Text, single);
  const auto zero = total_loss(d1, p1, s1, t1, Temperature());
  for (double v : zero.pair) CHECK(v == 0.0);
  CHECK(zero.image == 0.0);
  CHECK(zero.text == 0.0);
  CHECK(zero.total == 0.0);
}

TEST_CASE("losses match the scalar oracle on random aligned batches") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index b = 4, dim = 8;
    const auto d = batch(View::Drone, random_matrix(b, dim, rng));
    const auto p = batch(View::Panorama, random_matrix(b, dim, rng));
    const auto s = batch(View::Satellite, random_matrix(b, dim, rng));
    const auto t = batch(View::Text, random_matrix(b, dim, rng));
    const double tau = 0.05 + 0.1 * trial;
    const auto br = total_loss(d, p, s, t, Temperature::from_tau(tau));
    const auto want = oracle::pair_losses(to_rows(d.matrix()), to_rows(p.matrix()),
                                          to_rows(s.matrix()), to_rows(t.matrix()), tau);
    for (std::size_t k = 0; k < kLossPairCount; ++k) CHECK(std::abs(br.pair[k] - want[k]) <= 1e-10);
    const double img = (want[0] + want[1] + want[2]) / 3.0, txt = (want[3] + want[4] + want[5]) / 3.0;
    CHECK(std::abs(image_loss(d, p, s, Temperature::from_tau(tau)) - img) <= 1e-10);
    CHECK(std::abs(text_loss(t, d, p, s, Temperature::from_tau(tau)) - txt) <= 1e-10);
    CHECK(br.total == br.image + br.text);
    CHECK(br[LossPair::TextToSatellite] == br.pair[5]);

    // Same permutation on all four batches.
    std::vector<Eigen::Index> perm = {2, 0, 3, 1};
    const auto pd = batch(View::Drone, permute_rows(d.matrix(), perm));
    const auto pp = batch(View::Panorama, permute_rows(p.matrix(), perm));
    const auto ps = batch(View::Satellite, permute_rows(s.matrix(), perm));
    const auto pt = batch(View::Text, permute_rows(t.matrix(), perm));
    CHECK(total_loss(pd, pp, ps, pt, Temperature::from_tau(tau)).total ==
          doctest::Approx(br.total).epsilon(1e-12));

    // With every view equal, L_text and L_img both reduce to one InfoNCE.
    const auto as_p = batch(View::Panorama, d.matrix()), as_s = batch(View::Satellite, d.matrix());
    const auto as_t = batch(View::Text, d.matrix());
    CHECK(text_loss(as_t, d, as_p, as_s, Temperature::from_tau(tau)) ==
          doctest::Approx(image_loss(d, as_p, as_s, Temperature::from_tau(tau))).epsilon(1e-14));
  }
}

TEST_CASE("misaligned batches are rejected") {
  std::mt19937_64 rng(10);
  const auto d = batch(View::Drone, random_matrix(3, 4, rng));
  const auto p = EmbeddingBatch::from_raw(View::Panorama, {0, 1, 5}, random_matrix(3, 4, rng));
  const auto s = batch(View::Satellite, random_matrix(3, 4, rng));
  const auto t = batch(View::Text, random_matrix(3, 4, rng));
  CHECK(code_of([&] { image_loss(d, p, s, Temperature()); }) == Errc::BatchMisaligned);
  const auto short_b = batch(View::Satellite, random_matrix(2, 4, rng));
  const auto ok_p = batch(View::Panorama, random_matrix(3, 4, rng));
  CHECK(code_of([&] { text_loss(t, d, ok_p, short_b, Temperature()); }) == Errc::BatchMisaligned);
  CHECK(code_of([&] { image_loss(d, d, s, Temperature()); }) == Errc::InvalidArgument);
}

TEST_CASE("symmetric mode averages both directions") {
  std::mt19937_64 rng(11);
  const auto d = batch(View::Drone, random_matrix(5, 6, rng));
  const auto p = batch(View::Panorama, random_matrix(5, 6, rng));
  const auto s = batch(View::Satellite, random_matrix(5, 6, rng));
  const auto t = batch(View::Text, random_matrix(5, 6, rng));
  const auto tau = Temperature::from_tau(0.3);
  LossOptions sym;
  sym.symmetric = true;
  const auto got = total_loss(d, p, s, t, tau, sym);
  const auto fwd = oracle::pair_losses(to_rows(d.matrix()), to_rows(p.matrix()), to_rows(s.matrix()),
                                       to_rows(t.matrix()), 0.3);
  std::vector<std::size_t> y(5);
  std::iota(y.begin(), y.end(), 0);
  auto one = [&](const EmbeddingBatch& q, const EmbeddingBatch& g) {
    return oracle::infonce(oracle::scores(to_rows(q.matrix()), to_rows(g.matrix()), 0.3), y);
  };
  // Reverse directions: s->d, p->s, d->p, d->t, p->t, s->t.
  const double want[6] = {0.5 * (fwd[0] + one(s, d)), 0.5 * (fwd[1] + one(p, s)),
                          0.5 * (fwd[2] + one(d, p)), 0.5 * (fwd[3] + one(d, t)),
                          0.5 * (fwd[4] + one(p, t)), 0.5 * (fwd[5] + one(s, t))};
  for (std::size_t k = 0; k < kLossPairCount; ++k) CHECK(std::abs(got.pair[k] - want[k]) <= 1e-10);
}

TEST_CASE("per-pair temperature override") {
  std::mt19937_64 rng(12);
  const auto d = batch(View::Drone, random_matrix(4, 5, rng));
  const auto p = batch(View::Panorama, random_matrix(4, 5, rng));
  const auto s = batch(View::Satellite, random_matrix(4, 5, rng));
  const auto t = batch(View::Text, random_matrix(4, 5, rng));
  LossOptions o;
  o.pair_temperature[4] = Temperature::from_tau(0.2);
  const auto got = total_loss(d, p, s, t, Temperature::from_tau(0.9), o);
  const auto base = oracle::pair_losses(to_rows(d.matrix()), to_rows(p.matrix()), to_rows(s.matrix()),
                                        to_rows(t.matrix()), 0.9);
  const auto cold = oracle::pair_losses(to_rows(d.matrix()), to_rows(p.matrix()), to_rows(s.matrix()),
                                        to_rows(t.matrix()), 0.2);
  for (std::size_t k = 0; k < kLossPairCount; ++k) {
    CHECK(std::abs(got.pair[k] - (k == 4 ? cold[k] : base[k])) <= 1e-10);
  }
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(13);
  double worst = 0.0;
  for (std::size_t b : {2u, 4u, 8u}) {
    for (Eigen::Index d_in : {4, 8, 12}) {
      for (Eigen::Index d_out : {4, 8, 16}) {
        const auto inst = testing::random_grad_instance(b, d_in, d_out, rng);
        const auto r = testing::check_gradients(inst);
        worst = std::max(worst, r.worst);
        CHECK(r.blocks == 5u);
      }
    }
  }
  MESSAGE("worst per-block relative error " << worst);
  CHECK(worst < 1e-5);
}

TEST_CASE("gradients in symmetric and per-pair modes") {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 4; ++t) {
    const auto inst = testing::random_grad_instance(4, 6, 8, rng);
    LossOptions sym;
    sym.symmetric = true;
    CHECK(testing::check_gradients(inst, sym).worst < 1e-5);
    LossOptions pairs;
    pairs.pair_temperature[0] = Temperature::from_tau(0.4);
    pairs.pair_temperature[5] = Temperature::from_tau(0.7);
    const auto r = testing::check_gradients(inst, pairs);
    CHECK(r.blocks == 7u);
    CHECK(r.worst < 1e-5);
  }
}

TEST_CASE("gradient special points") {
  std::mt19937_64 rng(15);
  auto inst = testing::random_grad_instance(4, 5, 6, rng);
  // Identical rows everywhere: all six score matrices are uniform.
  for (auto& f : inst.features) {
    for (Eigen::Index i = 1; i < f.rows(); ++i) f.row(i) = f.row(0);
  }
  const auto flat = loss_gradients(inst.features, inst.encoders, inst.temperature);
  CHECK(std::abs(flat.log_tau) <= 1e-12);
  CHECK(flat.loss.total == doctest::Approx(2.0 * std::log(4.0)));

  // Scaling raw features: the embeddings and so the loss do not change, nor
  // do the weight gradients (dL/dy halves while x doubles).
  const auto base = testing::random_grad_instance(6, 5, 7, rng);
  auto scaled = base;
  for (auto& f : scaled.features) f *= 2.0;
  const auto g1 = loss_gradients(base.features, base.encoders, base.temperature);
  const auto g2 = loss_gradients(scaled.features, scaled.encoders, scaled.temperature);
  CHECK(g2.loss.total == doctest::Approx(g1.loss.total).epsilon(1e-12));
  CHECK(g2.log_tau == doctest::Approx(g1.log_tau).epsilon(1e-10));
  for (std::size_t v = 0; v < kViewCount; ++v) {
    CHECK((g2.weight[v] - g1.weight[v]).cwiseAbs().maxCoeff() <=
          1e-10 * (1.0 + g1.weight[v].cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("encoder errors") {
  std::mt19937_64 rng(16);
  auto inst = testing::random_grad_instance(3, 4, 5, rng);
  auto zero = inst;
  zero.encoders[1].weight.setZero();
  CHECK(code_of([&] { encoder_loss(zero.features, zero.encoders, zero.temperature); }) == Errc::ZeroVector);
  auto wrong = inst;
  wrong.features[2] = random_matrix(3, 7, rng);
  CHECK(code_of([&] { encoder_loss(wrong.features, wrong.encoders, wrong.temperature); }) ==
        Errc::DimensionMismatch);
  auto rows = inst;
  rows.features[3] = random_matrix(4, 4, rng);
  CHECK(code_of([&] { loss_gradients(rows.features, rows.encoders, rows.temperature); }) ==
        Errc::BatchMisaligned);
}
