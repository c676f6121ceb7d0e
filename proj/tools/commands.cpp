#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "geobridge/error.hpp"
#include "geobridge/evalmetrics.hpp"
#include "geobridge/gates.hpp"
#include "geobridge/gbem.hpp"
#include "geobridge/hashing.hpp"
#include "geobridge/image_io.hpp"
#include "geobridge/pipeline.hpp"
#include "geobridge/toy.hpp"

namespace geobridge::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::IoError:
    case Errc::ProviderError:
    case Errc::Diverged:
      return kExitIo;
    default:
      return kExitUsage;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(text.data());
  write_file_bytes(path, std::span<const std::uint8_t>(p, text.size()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_file_bytes(path)); }

ordered_json thresholds_json(const GateThresholds& t) {
  ordered_json j;
  j["bh_lap_min"] = t.bh_lap_min;
  j["bh_std_min"] = t.bh_std_min;
  j["c_range_min"] = t.c_range_min;
  j["un_entropy_min"] = t.un_entropy_min;
  j["un_sat_max"] = t.un_sat_max;
  j["un_noise_ratio_min"] = t.un_noise_ratio_min;
  return j;
}

/// Provenance line shared by every structured output. Inputs are recorded
/// by content hash only, so outputs do not depend on where files live.
ordered_json provenance(std::string_view kind, const std::string& provider,
                        const ordered_json& config, const ordered_json& inputs) {
  ordered_json h;
  h["kind"] = kind;
  h["format_version"] = kFormatVersion;
  h["tool_version"] = kToolVersion;
  if (!provider.empty()) h["provider"] = provider;
  h["config"] = config;
  h["config_hash"] = sha256_hex(config.dump());
  h["inputs"] = inputs;
  return h;
}

std::vector<int> check_scales(const std::vector<int>& scales) {
  if (scales.empty()) throw Error(Errc::InvalidArgument, "--scales: empty list");
  for (int s : scales) {
    if (!is_coverage_scale(s)) {
      throw Error(Errc::InvalidArgument,
                  "--scales: " + std::to_string(s) + " is not one of 80,100,120,150,180");
    }
  }
  std::vector<int> out = scales;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------- seed

struct SeedArgs {
  std::string input;
  std::string transform;
  int window = 80;
  std::optional<int> stride;
  std::string out;
};

int cmd_seed(const SeedArgs& a, std::ostream& out) {
  if (a.window < 1) throw Error(Errc::InvalidArgument, "--window must be >= 1");
  const int stride = a.stride.value_or(a.window);
  if (stride < 1) throw Error(Errc::InvalidArgument, "--stride must be >= 1");
  const auto sidecar = load_raster_sidecar(a.transform);
  const auto raster = load_image(a.input);
  const auto seeds = generate_seeds(sidecar.raster_id, sidecar.transform, raster.width(),
                                    raster.height(), a.window, stride);
  std::string text;
  for (const auto& s : seeds) text += seed_to_json(s) + "\n";
  write_text(a.out, text);
  out << seeds.size() << " seeds\n";
  return kExitOk;
}

// ---------------------------------------------------------------- build

struct BuildArgs {
  std::string seeds;
  std::string input;
  std::string transform;
  std::string provider_root;
  std::string thresholds;
  std::vector<int> scales{80, 100, 120, 150, 180};
  bool dedup_across_scales = false;
  int threads = 1;
  std::string out;
};

int cmd_build(const BuildArgs& a, std::ostream& out) {
  PipelineConfig cfg;
  cfg.scales = check_scales(a.scales);
  if (a.threads < 1) throw Error(Errc::InvalidArgument, "--threads must be >= 1");
  cfg.threads = a.threads;
  cfg.dedup_across_scales = a.dedup_across_scales;
  if (!a.thresholds.empty()) cfg.thresholds = load_thresholds(a.thresholds);

  const auto sidecar = load_raster_sidecar(a.transform);
  const auto raster = load_image(a.input);
  const auto seeds = read_seeds(a.seeds);
  const FixtureProvider provider(a.provider_root);

  const fs::path out_dir(a.out);
  ensure_dir(out_dir);
  AssetStore store(out_dir);
  const BuildResult r = build_dataset(seeds, raster, sidecar, provider, cfg, store);

  // Thread count is deliberately absent: it must not change any output.
  ordered_json config;
  config["scales"] = cfg.scales;
  config["thresholds"] = thresholds_json(cfg.thresholds);
  config["dedup_across_scales"] = cfg.dedup_across_scales;
  ordered_json inputs;
  inputs["seeds"] = file_sha256(a.seeds);
  inputs["raster"] = file_sha256(a.input);
  inputs["transform"] = file_sha256(a.transform);
  inputs["thresholds"] = a.thresholds.empty() ? ordered_json() : ordered_json(file_sha256(a.thresholds));
  const std::string identity = provider.identity();

  Manifest manifest{provenance("geobridge.manifest", identity, config, inputs), r.instances};
  std::ostringstream m;
  write_manifest(m, manifest);
  write_text(out_dir / "manifest.jsonl", m.str());

  std::ostringstream d;
  write_drop_log(d, provenance("geobridge.drops", identity, config, inputs), r.drops);
  write_text(out_dir / "drops.jsonl", d.str());

  std::ostringstream g;
  g << provenance("geobridge.gate_reports", identity, config, inputs).dump() << '\n';
  for (const auto& e : r.gate_reports) g << gate_report_json(e.report, e.id) << '\n';
  write_text(out_dir / "gate_reports.jsonl", g.str());

  const auto& c = r.counts;
  out << "seeds " << c.seeds << ", harvested " << c.harvested << ", crops " << c.crops
      << ", screened " << c.screened << ", gated " << c.gated << ", deduped " << c.deduped
      << ", manifest " << c.manifest << ", fetch drops " << c.fetch_drops << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train-toy

struct TrainArgs {
  TrainConfig config;
  bool fixed_temperature = false;
  std::size_t probe = 100;
  std::string out;
};

int cmd_train_toy(TrainArgs a, std::ostream& out) {
  a.config.learn_temperature = !a.fixed_temperature;
  a.config.validate();
  if (a.probe < 1) throw Error(Errc::InvalidArgument, "--probe must be >= 1");
  const auto& c = a.config;

  const TrainResult r = train_toy(c);
  const FeatureSet probe = toy_probe(c, a.probe);
  const DirectionRecall recall = cross_view_recall_at_1(r.encoders, probe);

  ordered_json config;
  config["batch"] = c.batch;
  config["dim"] = c.dim;
  config["lr"] = c.learning_rate;
  config["steps"] = c.steps;
  config["seed"] = c.seed;
  config["learn_temperature"] = c.learn_temperature;
  config["noise"] = c.noise;
  config["probe"] = a.probe;
  const auto header = provenance("geobridge.train_toy", "", config, ordered_json::object());

  const fs::path out_dir(a.out);
  ensure_dir(out_dir);
  std::ostringstream csv;
  csv << "# " << header.dump() << '\n';
  csv << "step,L_img,L_text,L_total,tau\n";
  csv.precision(17);
  for (const auto& row : r.trace) {
    csv << row.step << ',' << row.image << ',' << row.text << ',' << row.total << ','
        << row.tau << '\n';
  }
  write_text(out_dir / "trace.csv", csv.str());

  std::vector<std::uint64_t> ids(a.probe);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  for (std::size_t v = 0; v < kViewCount; ++v) {
    const View view = static_cast<View>(v);
    write_gbem(out_dir / ("probe_" + std::string(view_name(view)) + ".gbem"),
               EmbeddingBatch(view, ids, r.encoders[v].embed(probe[v])));
  }

  ordered_json summary;
  summary["provenance"] = header;
  summary["initial_L_total"] = r.trace.front().total;
  summary["final_L_total"] = r.trace.back().total;
  summary["final_tau"] = r.trace.back().tau;
  ordered_json rec;
  for (std::size_t q = 0; q < 3; ++q) {
    for (std::size_t g = 0; g < 3; ++g) {
      if (q == g) continue;
      rec[std::string(view_name(static_cast<View>(q))) + "->" +
          std::string(view_name(static_cast<View>(g)))] = recall[q][g];
    }
  }
  summary["probe_R@1"] = rec;
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");

  out << "L_total " << r.trace.front().total << " -> " << r.trace.back().total << " over "
      << c.steps << " steps, tau " << r.trace.back().tau << "\n";
  for (const auto& [name, v] : rec.items()) out << "  R@1 " << name << " " << v.get<double>() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string queries;
  std::string gallery;
  std::string judgments;
  std::string manifest;
  std::vector<std::size_t> k_list{1, 5, 10};
  std::vector<double> distances{50.0};
  std::size_t location_k = 1;
  std::string out;
};

Gallery gallery_from_manifest(const Manifest& m) {
  Gallery g;
  g.reserve(m.instances.size());
  for (const auto& inst : m.instances) {
    g.push_back({inst.instance_id, inst.location,
                 GroundFootprint(inst.location, inst.scale_m, inst.scale_m)});
  }
  return g;
}

std::vector<QueryJudgment> judgments_from_embeddings(const EvalArgs& a, const Manifest* manifest,
                                                     Gallery& gallery) {
  const EmbeddingBatch q = read_gbem(a.queries);
  const EmbeddingBatch g = read_gbem(a.gallery);
  if (q.dim() != g.dim()) {
    throw Error(Errc::DimensionMismatch, "queries have D=" + std::to_string(q.dim()) +
                                             ", gallery has D=" + std::to_string(g.dim()));
  }
  if (g.size() == 0) throw Error(Errc::InvalidArgument, "gallery is empty");

  auto item_for = [&](std::uint64_t id) -> GalleryItem {
    if (manifest == nullptr) return {std::to_string(id), std::nullopt, std::nullopt};
    if (id >= manifest->instances.size()) {
      throw Error(Errc::FormatError, "embedding id " + std::to_string(id) +
                                         " is not a manifest row (manifest has " +
                                         std::to_string(manifest->instances.size()) + ")");
    }
    const auto& inst = manifest->instances[id];
    return {inst.instance_id, inst.location,
            GroundFootprint(inst.location, inst.scale_m, inst.scale_m)};
  };

  std::unordered_map<std::uint64_t, std::size_t> index_of;
  gallery.clear();
  for (std::size_t i = 0; i < g.size(); ++i) {
    index_of.emplace(g.ids()[i], i);
    gallery.push_back(item_for(g.ids()[i]));
  }

  std::vector<QueryJudgment> out;
  out.reserve(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const std::uint64_t id = q.ids()[i];
    const auto gt = index_of.find(id);
    if (gt == index_of.end()) {
      throw Error(Errc::InvalidArgument,
                  "query id " + std::to_string(id) + " has no counterpart in the gallery");
    }
    QueryJudgment j;
    const GalleryItem self = item_for(id);
    j.query_id = self.id;
    j.query_location = self.location;
    j.ground_truth = gt->second;
    for (const auto& s : top_k(q.row(i), g, g.size())) j.ranking.push_back(index_of.at(s.id));
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<QueryJudgment> judgments_from_file(const EvalArgs& a, const Manifest& manifest,
                                               const Gallery& gallery) {
  std::unordered_map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < gallery.size(); ++i) index_of.emplace(gallery[i].id, i);
  auto lookup = [&](const std::string& id, const std::string& where) {
    const auto it = index_of.find(id);
    if (it == index_of.end()) {
      throw Error(Errc::FormatError, where + ": unknown instance id " + id);
    }
    return it->second;
  };

  std::ifstream in(a.judgments);
  if (!in) throw Error(Errc::IoError, "cannot open " + a.judgments);
  std::vector<QueryJudgment> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = fs::path(a.judgments).filename().string() + ":" + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      QueryJudgment qj;
      qj.query_id = j.at("query_id").get<std::string>();
      for (const auto& id : j.at("ranking")) qj.ranking.push_back(lookup(id.get<std::string>(), where));
      qj.ground_truth = lookup(j.at("ground_truth").get<std::string>(), where);
      if (j.contains("query_location")) {
        const auto& p = j.at("query_location");
        qj.query_location = GeoPoint(p.at("lat").get<double>(), p.at("lon").get<double>());
      } else if (const auto it = index_of.find(qj.query_id); it != index_of.end()) {
        qj.query_location = manifest.instances[it->second].location;
      }
      out.push_back(std::move(qj));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::FormatError, where + ": " + e.what());
    }
  }
  return out;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const bool from_embeddings = !a.queries.empty() || !a.gallery.empty();
  if (from_embeddings == !a.judgments.empty()) {
    throw Error(Errc::InvalidArgument,
                "give either --queries and --gallery, or --judgments with --manifest");
  }
  if (from_embeddings && (a.queries.empty() || a.gallery.empty())) {
    throw Error(Errc::InvalidArgument, "--queries and --gallery must be given together");
  }
  if (!from_embeddings && a.manifest.empty()) {
    throw Error(Errc::InvalidArgument, "--judgments needs --manifest");
  }

  std::optional<Manifest> manifest;
  if (!a.manifest.empty()) manifest = read_manifest(a.manifest);

  MetricConfig mc;
  mc.k_list = a.k_list;
  mc.distances_m = a.distances;
  mc.location_k = a.location_k;
  mc.geo_metrics = manifest.has_value();
  mc.validate();

  Gallery gallery;
  std::vector<QueryJudgment> judgments;
  ordered_json inputs;
  if (from_embeddings) {
    judgments = judgments_from_embeddings(a, manifest ? &*manifest : nullptr, gallery);
    inputs["queries"] = file_sha256(a.queries);
    inputs["gallery"] = file_sha256(a.gallery);
  } else {
    gallery = gallery_from_manifest(*manifest);
    judgments = judgments_from_file(a, *manifest, gallery);
    inputs["judgments"] = file_sha256(a.judgments);
  }
  inputs["manifest"] = manifest ? ordered_json(file_sha256(a.manifest)) : ordered_json();

  const MetricReport report = aggregate(judgments, gallery, mc);
  const std::string table = metric_report_table(report);
  out << table;

  if (!a.out.empty()) {
    ordered_json config;
    config["k_list"] = mc.k_list;
    config["distances_m"] = mc.distances_m;
    config["location_k"] = mc.location_k;
    config["geo_metrics"] = mc.geo_metrics;
    ordered_json doc;
    doc["provenance"] = provenance("geobridge.metrics", "", config, inputs);
    doc["metrics"] = metric_report_json(report);
    const fs::path out_dir(a.out);
    ensure_dir(out_dir);
    write_text(out_dir / "report.json", doc.dump(2) + "\n");
    write_text(out_dir / "report.txt", table);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- gate-report

struct GateArgs {
  std::string input;
  std::string thresholds;
  std::string id;
  std::string out;
};

int cmd_gate_report(const GateArgs& a, std::ostream& out) {
  const GateThresholds t = a.thresholds.empty() ? GateThresholds{} : load_thresholds(a.thresholds);
  const auto img = load_image(a.input);
  const std::string id = a.id.empty() ? fs::path(a.input).stem().string() : a.id;
  const std::string line = gate_report_json(gate_cascade(to_grayscale(img), t), id);
  out << line << '\n';
  if (!a.out.empty()) write_text(a.out, line + "\n");
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GeoBridge dataset construction, toy training and retrieval evaluation",
               "geobridge"};
  app.set_config("--config", "", "TOML or INI file; command-line flags take precedence");
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  SeedArgs seed;
  auto* s = app.add_subcommand("seed", "Tile a georeferenced raster into seed windows");
  s->add_option("--input", seed.input, "Drone raster (PNG or JPEG)")->required()->check(CLI::ExistingFile);
  s->add_option("--transform", seed.transform, "Raster sidecar JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--window", seed.window, "Window size in pixels")->capture_default_str();
  s->add_option("--stride", seed.stride, "Window stride in pixels (default: window)");
  s->add_option("--out", seed.out, "Seeds JSONL to write")->required();

  BuildArgs build;
  auto* b = app.add_subcommand("build", "Build the tri-view manifest from seeds");
  b->add_option("--seeds", build.seeds, "Seeds JSONL")->required()->check(CLI::ExistingFile);
  b->add_option("--input", build.input, "Drone raster")->required()->check(CLI::ExistingFile);
  b->add_option("--transform", build.transform, "Raster sidecar JSON")->required()->check(CLI::ExistingFile);
  b->add_option("--provider-root", build.provider_root, "Fixture provider directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  b->add_option("--thresholds", build.thresholds, "Gate thresholds file")->check(CLI::ExistingFile);
  b->add_option("--scales", build.scales, "Coverage scales in meters")->delimiter(',')->capture_default_str();
  b->add_flag("--dedup-across-scales", build.dedup_across_scales,
              "Let crops of different scales suppress each other");
  b->add_option("--threads", build.threads, "Worker threads")->capture_default_str();
  b->add_option("--out", build.out, "Output directory")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train-toy", "Train linear encoders on synthetic aligned views");
  t->add_option("--steps", train.config.steps)->capture_default_str();
  t->add_option("--batch", train.config.batch)->capture_default_str();
  t->add_option("--dim", train.config.dim)->capture_default_str();
  t->add_option("--lr", train.config.learning_rate)->capture_default_str();
  t->add_option("--seed", train.config.seed)->capture_default_str();
  t->add_option("--noise", train.config.noise)->capture_default_str();
  t->add_option("--probe", train.probe, "Held-out probe size")->capture_default_str();
  t->add_flag("--fixed-temperature", train.fixed_temperature, "Keep tau at its initial value");
  t->add_option("--out", train.out, "Output directory")->required();

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Compute retrieval metrics");
  e->add_option("--queries", eval.queries, "Query embeddings (GBEM)")->check(CLI::ExistingFile);
  e->add_option("--gallery", eval.gallery, "Gallery embeddings (GBEM)")->check(CLI::ExistingFile);
  e->add_option("--judgments", eval.judgments, "Ranked judgments JSONL")->check(CLI::ExistingFile);
  e->add_option("--manifest", eval.manifest, "Manifest for locations and footprints")
      ->check(CLI::ExistingFile);
  e->add_option("--k-list", eval.k_list)->delimiter(',')->capture_default_str();
  e->add_option("--distance-list", eval.distances, "L@d thresholds in meters")
      ->delimiter(',')
      ->capture_default_str();
  e->add_option("--location-k", eval.location_k, "Rank depth for L@d")->capture_default_str();
  e->add_option("--out", eval.out, "Directory for report.json and report.txt");

  GateArgs gate;
  auto* g = app.add_subcommand("gate-report", "Run the quality gates on one image");
  g->add_option("--input", gate.input, "Image")->required()->check(CLI::ExistingFile);
  g->add_option("--thresholds", gate.thresholds)->check(CLI::ExistingFile);
  g->add_option("--id", gate.id, "Report id (default: file stem)");
  g->add_option("--out", gate.out, "File to write the JSON line to");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*s) return cmd_seed(seed, out);
    if (*b) return cmd_build(build, out);
    if (*t) return cmd_train_toy(train, out);
    if (*e) return cmd_eval(eval, out);
    if (*g) return cmd_gate_report(gate, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code_for(ex.code());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace geobridge::cli
