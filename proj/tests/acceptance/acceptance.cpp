// Runs each acceptance criterion and prints one PASS/FAIL line per
// criterion. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "geobridge/error.hpp"
#include "geobridge/evalmetrics.hpp"
#include "geobridge/gates.hpp"
#include "geobridge/gbem.hpp"
#include "geobridge/geodesy.hpp"
#include "geobridge/image_io.hpp"
#include "geobridge/objective.hpp"
#include "geobridge/pipeline.hpp"
#include "geobridge/toy.hpp"
#include "gradcheck.hpp"
#include "metric_cases.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace geobridge;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- 1

Verdict gradient_fidelity() {
  std::mt19937_64 rng(31);
  const std::size_t batches[] = {2, 4, 8};
  const Eigen::Index d_ins[] = {4, 12}, d_outs[] = {8, 16};
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto inst = testing::random_grad_instance(batches[i % 3], d_ins[(i / 3) % 2], d_outs[(i / 6) % 2], rng);
    worst = std::max(worst, testing::check_gradients(inst).worst);
  }
  return {worst < 1e-5, fmt("worst per-block relative error %.3g over 20 instances", worst)};
}

// ---------------------------------------------------------------- 2

Verdict loss_closed_forms() {
  double worst_uniform = 0.0;
  for (Eigen::Index b = 2; b <= 64; ++b) {
    const Matrix flat = Matrix::Constant(b, b, 0.75);
    worst_uniform = std::max(worst_uniform, std::abs(infonce_identity(flat) - std::log(static_cast<double>(b))));
  }
  Matrix one(1, 1);
  one << -4.2;
  const double single = infonce_identity(one);

  std::mt19937_64 rng(32);
  std::normal_distribution<double> g(0.0, 3.0);
  std::uniform_real_distribution<double> shift(-100.0, 100.0);
  double worst_shift = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index b = 2 + t % 15;
    Matrix s(b, b);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = g(rng);
    Matrix shifted = s;
    for (Eigen::Index i = 0; i < b; ++i) shifted.row(i).array() += shift(rng);
    worst_shift = std::max(worst_shift, std::abs(infonce_identity(shifted) - infonce_identity(s)));
  }
  const bool pass = worst_uniform <= 1e-12 && single == 0.0 && worst_shift <= 1e-10;
  return {pass, fmt("|uniform - ln B| <= %.3g, B=1 -> %g, shift error %.3g", worst_uniform, single, worst_shift)};
}

// ---------------------------------------------------------------- 3

Verdict toy_alignment() {
  const TrainConfig cfg;
  const TrainResult r = train_toy(cfg);
  const DirectionRecall recall = cross_view_recall_at_1(r.encoders, toy_probe(cfg, 100));
  double min_recall = 1.0;
  for (std::size_t q = 0; q < 3; ++q) {
    for (std::size_t g = 0; g < 3; ++g) {
      if (q != g) min_recall = std::min(min_recall, recall[q][g]);
    }
  }
  const double first = r.trace.front().total, last = r.trace.back().total;
  return {last < first && min_recall >= 0.9,
          fmt("L_total %.4f -> %.4f, min R@1 over six directions %.2f", first, last, min_recall)};
}

// ---------------------------------------------------------------- 4

Verdict metric_oracle() {
  std::mt19937_64 rng(34);
  std::size_t mismatches = 0;
  const std::vector<std::size_t> ks = {1, 5, 10};
  const std::vector<double> ds = {25.0, 50.0, 100.0};
  auto compare = [&](const testing::MetricCase& c) {
    MetricConfig cfg;
    cfg.k_list = ks;
    cfg.distances_m = ds;
    const auto r = aggregate(c.judgments, c.gallery, cfg);
    const auto want = oracle::brute_force(c.plain, c.items, ks, ds, 1);
    bool same = r.recall_1pct == want.r1pct && r.ap == want.ap && r.hit && *r.hit == want.hit;
    for (std::size_t i = 0; i < ks.size(); ++i) same = same && r.recall[i].second == want.recall[i];
    for (std::size_t i = 0; i < ds.size(); ++i) same = same && r.location[i].second == want.loc[i];
    if (!same) ++mismatches;
  };
  // 100 single-query judgments, each over its own gallery, then one pooled set.
  for (int i = 0; i < 100; ++i) compare(testing::random_metric_case(1, 64, rng));
  compare(testing::random_metric_case(100, 64, rng));

  std::size_t ap_cases = 0, ap_bad = 0;
  for (std::size_t n = 1; n <= 64; ++n) {
    for (std::size_t rank = 1; rank <= n; ++rank) {
      QueryJudgment j;
      for (std::size_t i = 0; i < n; ++i) j.ranking.push_back(i);
      j.ground_truth = rank - 1;
      ++ap_cases;
      if (average_precision(j) != 1.0 / static_cast<double>(rank)) ++ap_bad;
    }
  }
  return {mismatches == 0 && ap_bad == 0,
          fmt("%zu/101 oracle mismatches, AP=1/rank failed %zu/%zu", mismatches, ap_bad, ap_cases)};
}

// ---------------------------------------------------------------- 5

Verdict geometry_oracles() {
  std::mt19937 rng(35);
  std::uniform_real_distribution<double> off(-200.0, 200.0), lat(-60.0, 60.0), lon(-179.0, 179.0);
  const int scales[] = {80, 100, 120, 150, 180};
  double worst_overlap = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double la = lat(rng), lo = lon(rng);
    const double lb = la + off(rng) / oracle::kM;
    const double ob = lo + off(rng) / (oracle::kM * std::cos(la * std::numbers::pi / 180.0));
    const double wa = scales[rng() % 5], ha = scales[rng() % 5], wb = scales[rng() % 5], hb = scales[rng() % 5];
    const double got = overlap_ratio(GroundFootprint(GeoPoint(la, lo), wa, ha), GroundFootprint(GeoPoint(lb, ob), wb, hb));
    worst_overlap = std::max(worst_overlap, std::abs(got - oracle::overlap_raster(la, lo, wa, ha, lb, ob, wb, hb)));
  }
  const double zero = haversine_distance({12.0, 34.0}, {12.0, 34.0});
  const double one_deg = std::abs(haversine_distance({0, 0}, {1, 0}) - 111194.9);
  const double antipodal = std::abs(haversine_distance({0, 0}, {0, 180}) - 20015086.8);

  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_trip = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double s = 1e-5 * (1.0 + 9.0 * std::abs(u(rng)));
    const AffineGeoTransform t{2.0 + u(rng), s, 0.2 * s * u(rng), 48.0 + u(rng), 0.2 * s * u(rng), -s};
    const auto p = pixel_to_geo(t, 5000.0 * (u(rng) + 1.0), 5000.0 * (u(rng) + 1.0));
    const auto px = geo_to_pixel(t, p);
    const auto back = pixel_to_geo(t, px.col, px.row);
    worst_trip = std::max({worst_trip, std::abs(back.lat() - p.lat()), std::abs(back.lon() - p.lon())});
  }
  const bool pass = worst_overlap <= 1e-3 && zero == 0.0 && one_deg <= 0.1 && antipodal <= 0.1 && worst_trip < 1e-9;
  return {pass, fmt("overlap error %.2g, anchors off by %g/%.3g/%.3g m, round trip %.2g deg", worst_overlap, zero,
                    one_deg, antipodal, worst_trip)};
}

// ---------------------------------------------------------------- 6

Verdict gate_behavior() {
  const GateThresholds d;
  auto fixture = [](const char* name) { return to_grayscale(load_image(testing::data_dir() / "gates" / name)); };
  const auto textured = fixture("textured.png");
  bool ok = gate_cascade(testing::constant_gray(64, 64, 128), d).rejected_by == GateStage::BH;
  ok = ok && gate_cascade(testing::ramp_gray(256, 64), d).rejected_by == GateStage::BH;
  ok = ok && gate_cascade(box_blur(textured, 4), d).rejected_by == GateStage::BH;
  ok = ok && gate_cascade(textured, d).verdict == GateVerdict::Pass;
  const bool fixtures_ok = ok;

  bool blur_ok = true, rejected = false;
  double prev = laplacian_variance(textured);
  for (int r = 1; r <= 9; ++r) {
    const auto b = box_blur(textured, r);
    const double lap = laplacian_variance(b);
    const bool now = bh_gate(b, d) == GateVerdict::Reject;
    blur_ok = blur_ok && lap <= prev && !(rejected && !now);
    rejected = rejected || now;
    prev = lap;
  }

  std::mt19937 rng(36);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<GrayImage> images = {textured, fixture("rich.png"), testing::checkerboard(32, 32, 4, 70, 185),
                                         testing::random_gray(64, 64, rng)};
  std::size_t flips = 0;
  for (int trial = 0; trial < 50; ++trial) {
    GateThresholds base;
    base.bh_lap_min = 200.0 * u(rng);
    base.bh_std_min = 40.0 * u(rng);
    base.c_range_min = 150.0 * u(rng);
    base.un_entropy_min = 8.0 * u(rng);
    base.un_sat_max = u(rng);
    base.un_noise_ratio_min = 0.3 * u(rng);
    GateThresholds raised = base;
    raised.bh_lap_min += 100.0 * u(rng);
    raised.bh_std_min += 20.0 * u(rng);
    raised.c_range_min += 60.0 * u(rng);
    raised.un_entropy_min = std::min(8.0, raised.un_entropy_min + 2.0 * u(rng));
    raised.un_noise_ratio_min = std::min(1.0, raised.un_noise_ratio_min + 0.2 * u(rng));
    raised.un_sat_max *= u(rng);
    for (const auto& g : images) {
      if (gate_cascade(g, base).verdict == GateVerdict::Reject &&
          gate_cascade(g, raised).verdict == GateVerdict::Pass) {
        ++flips;
      }
    }
  }
  return {fixtures_ok && blur_ok && rejected && flips == 0,
          fmt("fixture stages %s, blur monotone %s, %zu reject->pass flips in 50 perturbations",
              fixtures_ok ? "ok" : "wrong", blur_ok && rejected ? "yes" : "no", flips)};
}

// ---------------------------------------------------------------- 7

Verdict pipeline_determinism() {
  const auto mini = testing::data_dir() / "mini";
  const std::string golden_manifest = testing::slurp(mini / "golden" / "manifest.jsonl");
  const std::string golden_drops = testing::slurp(mini / "golden" / "drops.jsonl");
  std::size_t runs = 0, identical = 0;
  std::string kept_manifest;
  for (const char* threads : {"1", "4", "1", "4"}) {
    testing::TempDir dir("acceptance");
    std::ostringstream out, err;
    const int code = cli::run({"build", "--seeds", (mini / "seeds.jsonl").string(), "--input",
                               (mini / "raster.png").string(), "--transform", (mini / "raster.json").string(),
                               "--provider-root", (mini / "provider").string(), "--threads", threads, "--out",
                               dir.path().string()},
                              out, err);
    ++runs;
    const std::string m = testing::slurp(dir / "manifest.jsonl");
    if (code == 0 && m == golden_manifest && testing::slurp(dir / "drops.jsonl") == golden_drops) ++identical;
    kept_manifest = m;
  }

  // Rebuild each retained crop's realized footprint and check all pairs.
  testing::TempDir dir("acceptance-dedup");
  std::ofstream(dir / "m.jsonl") << kept_manifest;
  const Manifest manifest = read_manifest(dir / "m.jsonl");
  const auto sidecar = load_raster_sidecar(mini / "raster.json");
  const auto raster = load_image(mini / "raster.png");
  std::vector<DedupCandidate> kept;
  for (const auto& inst : manifest.instances) {
    const auto crop = inverse_crop(raster, sidecar.transform, inst.location, inst.scale_m);
    kept.push_back({inst.instance_id, crop.footprint, inst.location, inst.scale_m});
  }
  std::size_t violations = 0, pairs = 0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = i + 1; j < kept.size(); ++j) {
      ++pairs;
      if (is_duplicate(kept[i], kept[j], {false})) ++violations;
    }
  }
  return {identical == runs && violations == 0 && !kept.empty(),
          fmt("%zu/%zu runs byte-identical to golden (threads 1,4,1,4), %zu violating of %zu pairs", identical,
              runs, violations, pairs)};
}

// ---------------------------------------------------------------- 8

Verdict gbem_round_trip() {
  std::mt19937_64 rng(38);
  std::normal_distribution<double> g;
  Matrix raw(1000, 64);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = g(rng);
  std::vector<std::uint64_t> ids(1000);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = rng();
  const auto batch = EmbeddingBatch::from_raw(View::Satellite, ids, raw);

  testing::TempDir dir("acceptance-gbem");
  write_gbem(dir / "e.gbem", batch);
  const auto back = read_gbem(dir / "e.gbem");
  bool exact = back.ids() == batch.ids() && back.view() == batch.view();
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    exact = exact && back.matrix().data()[i] == static_cast<double>(static_cast<float>(batch.matrix().data()[i]));
  }
  exact = exact && encode_gbem(back) == encode_gbem(batch);

  auto rejection = [](std::vector<std::uint8_t> bytes) -> std::string {
    try {
      decode_gbem(bytes);
    } catch (const Error& e) {
      return e.code() == Errc::FormatError ? e.detail() : std::string();
    }
    return {};
  };
  const auto good = encode_gbem(batch);
  auto magic = good;
  magic[0] = 'X';
  auto non_unit = good;
  const float doubled = 2.0f * static_cast<float>(batch.matrix()(0, 0));
  std::memcpy(non_unit.data() + kGbemHeaderSize + 8, &doubled, 4);
  const std::string magic_err = rejection(magic), unit_err = rejection(non_unit);
  const bool rejects = magic_err.find("bad magic") != std::string::npos && unit_err.find("record 0") != std::string::npos;
  return {exact && rejects, fmt("1000 x 64 round trip %s; bad magic -> \"%s\"; non-unit -> \"%s\"",
                                exact ? "bit-exact" : "DIFFERS", magic_err.c_str(), unit_err.c_str())};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
    double budget_s;  // 0: no runtime limit
  };
  const std::vector<Criterion> criteria = {
      {"gradient fidelity", gradient_fidelity, 10.0},
      {"loss closed forms", loss_closed_forms, 0.0},
      {"toy alignment", toy_alignment, 60.0},
      {"metric oracle equivalence", metric_oracle, 0.0},
      {"geometry oracles", geometry_oracles, 0.0},
      {"gate behavior", gate_behavior, 0.0},
      {"pipeline determinism", pipeline_determinism, 30.0},
      {"wire-format round trip", gbem_round_trip, 0.0},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      v.pass = false;
      v.detail += fmt(" [over the %.0f s budget]", c.budget_s);
    }
    std::printf("%s  %zu %-26s %s (%.2f s)\n", v.pass ? "PASS" : "FAIL", i + 1, c.name, v.detail.c_str(), secs);
    if (!v.pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
