#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "canopy/config.hpp"
#include "canopy/evaluation.hpp"
#include "canopy/experiment.hpp"
#include "canopy/map_snapshot.hpp"
#include "canopy/scene_io.hpp"

namespace fs = std::filesystem;
using namespace canopy;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitExhausted = 3;

// Main parameter flags; each one that is given overrides the same-named config key.
struct TableOverrides {
  std::optional<double> resolution, alpha, beta, camera_max_range, background_confidence,
      detection_confidence_threshold;

  void attach(CLI::App* app) {
    app->add_option("--resolution", resolution, "Voxel resolution (m)");
    app->add_option("--alpha", alpha, "Utility cost weight");
    app->add_option("--beta", beta, "Semantic weight");
    app->add_option("--camera-max-range", camera_max_range, "Camera max range (m)");
    app->add_option("--background-confidence", background_confidence, "Background confidence");
    app->add_option("--detection-confidence-threshold", detection_confidence_threshold,
                    "Detection confidence threshold");
  }

  nlohmann::json patch() const {
    nlohmann::json j = nlohmann::json::object();
    if (resolution) j["resolution"] = *resolution;
    if (alpha) j["alpha"] = *alpha;
    if (beta) j["beta"] = *beta;
    if (camera_max_range) j["camera_max_range"] = *camera_max_range;
    if (background_confidence) j["background_confidence"] = *background_confidence;
    if (detection_confidence_threshold) j["detection_confidence_threshold"] = *detection_confidence_threshold;
    return j;
  }
};

int cmd_generate(std::uint64_t seed, const std::string& preset, std::optional<double> resolution,
                 const std::string& out, const std::string& truth_out) {
  TreeParams p = TreeParams::for_preset(parse_preset(preset));
  if (resolution) p.resolution = *resolution;
  const SceneModel scene = generate_scene(seed, p);
  save_scene(scene, out);
  if (!truth_out.empty()) {
    write_atomic(truth_out, ground_truth_json(scene, EvaluationParams{}.matching_radius).dump(1) + "\n");
  }
  std::cout << "scene " << seed << " (" << preset << "): " << scene.geometry().size() << " geometry voxels\n"
            << "shepherds_crook: " << scene.count_class(kShepherdsCrook) << "\n"
            << "canker: " << scene.count_class(kCanker) << "\n";
  return kExitOk;
}

int cmd_run(const std::string& scene_path, const std::string& planner, const std::string& config_path,
            const TableOverrides& overrides, std::uint64_t seed, int views, const std::string& out) {
  const SceneModel scene = load_scene(scene_path);
  const PlannerMode mode = parse_planner_mode(planner);
  ExperimentConfig cfg;
  bool resolution_given = false;
  if (!config_path.empty()) {
    cfg = load_config(config_path);
    std::ifstream in(config_path);
    resolution_given = nlohmann::json::parse(in, nullptr, false).contains("resolution");
  }
  const auto patch = overrides.patch();
  cfg = apply_config(patch, cfg);
  resolution_given = resolution_given || patch.contains("resolution");
  if (resolution_given && std::abs(cfg.resolution - scene.bounds().resolution()) > 1e-12) {
    throw ConfigError("config resolution " + fmt_num(cfg.resolution) + " does not match the scene resolution " +
                      fmt_num(scene.bounds().resolution()));
  }

  const ReachabilityGrid reach = cfg.build_reach();
  auto run = run_single(scene, mode, cfg, reach, seed, views);
  const auto& ep = run.episode;

  Metadata meta = base_metadata(cfg);
  meta.emplace_back("scene_seed", std::to_string(scene.seed()));
  meta.emplace_back("run_id", std::to_string(seed));
  meta.emplace_back("run_seed", std::to_string(run_seed(cfg, scene.seed(), mode, seed)));
  if (ep.exhausted) meta.emplace_back("note", ep.note);
  const fs::path dir(out);
  write_atomic(dir / "episode.csv", episode_csv(ep.records, scene.seed(), seed, meta));
  save_snapshot(run.map, (dir / "map.bin").string());

  if (!ep.records.empty()) {
    const auto& last = ep.records.back();
    std::printf("%s: %zu viewpoints, F1 %.4f, precision %.4f, recall %.4f, coverage %.4f\n",
                std::string(to_string(mode)).c_str(), ep.records.size(), last.f1, last.precision, last.recall,
                last.coverage);
  }
  if (ep.exhausted) {
    std::cerr << "note: " << ep.note << "\n";
    if (mode != PlannerMode::Baseline) return kExitExhausted;
  }
  return kExitOk;
}

int cmd_compare(const std::string& spec_path, std::optional<int> threads, const std::string& out_override) {
  ExperimentSpec spec = load_spec(spec_path);
  if (threads) spec.threads = *threads;
  if (!out_override.empty()) spec.output_dir = out_override;
  const auto res = run_compare(spec, &std::cerr);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  print_summary(res, std::cout);
  std::cout << "outputs written to " << spec.output_dir << "\n";
  return res.summary.empty() ? kExitFailure : kExitOk;
}

int cmd_inspect(const std::string& map_path) {
  const SemanticOctree map = load_snapshot(map_path);
  const RoiBounds& b = map.bounds();
  std::size_t free_n = 0, occ_n = 0, labelled = 0;
  std::size_t per_class[3] = {0, 0, 0};
  map.for_each_observed([&](const VoxelKey& k, const SemanticVoxel& v) {
    if (map.occupancy_state(k) == Occupancy::Occupied) {
      ++occ_n;
      if (v.has_semantics) {
        ++labelled;
        if (v.class_id >= 0 && v.class_id <= 2) ++per_class[v.class_id];
      }
    } else {
      ++free_n;
    }
  });
  const auto d = b.dims();
  const auto clusters = extract_clusters(map);
  std::printf("dims: %d x %d x %d (%zu voxels), resolution %.17g\n", d[0], d[1], d[2], b.voxel_count(), b.resolution());
  std::printf("min: %.17g %.17g %.17g\n", b.min_corner().x(), b.min_corner().y(), b.min_corner().z());
  std::printf("max: %.17g %.17g %.17g\n", b.max_corner().x(), b.max_corner().y(), b.max_corner().z());
  std::printf("unknown: %zu\nfree: %zu\noccupied: %zu\ncoverage: %.6f\n", b.voxel_count() - map.known_count(), free_n,
              occ_n, map.coverage());
  std::printf("labelled: %zu (background %zu, shepherds_crook %zu, canker %zu)\n", labelled, per_class[0],
              per_class[1], per_class[2]);
  std::printf("frontier voxels: %zu\npredicted clusters: %zu\n", map.frontier_voxels().size(), clusters.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic next-best-view planning on simulated symptomatic trees"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Generate a procedural tree scene");
  std::uint64_t gen_seed = 1;
  std::string gen_preset = "orchard", gen_out, gen_truth;
  std::optional<double> gen_res;
  gen->add_option("--seed", gen_seed, "Scene seed")->capture_default_str();
  gen->add_option("--preset", gen_preset, "orchard or lab")->capture_default_str();
  gen->add_option("--resolution", gen_res, "Voxel resolution (m)");
  gen->add_option("--out", gen_out, "Scene file to write")->required();
  gen->add_option("--truth", gen_truth, "Optional ground-truth symptom list to write");

  auto* run = app.add_subcommand("run", "Run one planner episode on a scene file");
  std::string run_scene, run_planner = "semantic", run_config, run_out = ".";
  std::uint64_t run_seed_id = 0;
  int run_views = 30;
  TableOverrides overrides;
  run->add_option("--scene", run_scene, "Scene file")->required();
  run->add_option("--planner", run_planner, "baseline, volumetric or semantic")->capture_default_str();
  run->add_option("--config", run_config, "JSON config file");
  run->add_option("--seed", run_seed_id, "Run id used in seed derivation")->capture_default_str();
  run->add_option("--views", run_views, "Number of viewpoints")->capture_default_str();
  run->add_option("--out", run_out, "Output directory")->capture_default_str();
  overrides.attach(run);

  auto* cmp = app.add_subcommand("compare", "Run a full planner comparison from a spec file");
  std::string cmp_spec, cmp_out;
  std::optional<int> cmp_threads;
  cmp->add_option("--spec", cmp_spec, "JSON spec file")->required();
  cmp->add_option("--threads", cmp_threads, "Worker threads");
  cmp->add_option("--out", cmp_out, "Override the spec's output_dir");

  auto* insp = app.add_subcommand("inspect-map", "Print statistics of a map snapshot");
  std::string insp_map;
  insp->add_option("--map", insp_map, "Map snapshot file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // usage mistakes count as configuration errors; --help still exits 0
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_seed, gen_preset, gen_res, gen_out, gen_truth);
    if (run->parsed()) return cmd_run(run_scene, run_planner, run_config, overrides, run_seed_id, run_views, run_out);
    if (cmp->parsed()) return cmd_compare(cmp_spec, cmp_threads, cmp_out);
    if (insp->parsed()) return cmd_inspect(insp_map);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
