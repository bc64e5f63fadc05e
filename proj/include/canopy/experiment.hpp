#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "canopy/config.hpp"
#include "canopy/episode.hpp"
#include "canopy/evaluation.hpp"
#include "canopy/scene.hpp"

namespace canopy {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kSeedDerivation =
    "run_seed = mix_seeds(noise_seed, scene_seed, planner_index, run_id); mix_seeds chains splitmix64 "
    "from 0x6a09e667f3bcc909 as h = splitmix64(h ^ splitmix64(x)); planner_index baseline=0 volumetric=1 semantic=2";

struct ExperimentSpec {
  std::vector<std::uint64_t> scene_seeds{1, 2, 3, 4, 5};
  int runs_per_scene = 10;
  int n_views = 30;
  std::vector<PlannerMode> planner_modes{PlannerMode::Baseline, PlannerMode::Volumetric, PlannerMode::Semantic};
  ScenePreset preset = ScenePreset::Orchard;
  std::string output_dir = "compare_out";
  ExperimentConfig config;
  int threads = 1;

  void validate() const {
    if (scene_seeds.empty()) throw ConfigError("scene_seeds must be non-empty");
    if (runs_per_scene < 1) throw ConfigError("runs_per_scene must be >= 1");
    if (n_views < 1) throw ConfigError("n_views must be >= 1");
    if (planner_modes.empty()) throw ConfigError("planner_modes must be non-empty");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    config.validate();
  }
};

/// Spec keys: scene_seeds, runs_per_scene, n_views, planner_modes, preset, output_dir,
/// threads, config (flat config object) and detector (detector keys only). Relative
/// output_dir values resolve against `base_dir`.
inline ExperimentSpec parse_spec(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw ConfigError("spec must be a JSON object");
  ExperimentSpec s;
  nlohmann::json cfg = nlohmann::json::object();
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      const auto& v = it.value();
      if (key == "scene_seeds") {
        s.scene_seeds = v.get<std::vector<std::uint64_t>>();
      } else if (key == "runs_per_scene") {
        s.runs_per_scene = v.get<int>();
      } else if (key == "n_views") {
        s.n_views = v.get<int>();
      } else if (key == "planner_modes") {
        s.planner_modes.clear();
        for (const auto& m : v) s.planner_modes.push_back(parse_planner_mode(m.get<std::string>()));
      } else if (key == "preset") {
        s.preset = parse_preset(v.get<std::string>());
      } else if (key == "output_dir") {
        s.output_dir = v.get<std::string>();
      } else if (key == "threads") {
        s.threads = v.get<int>();
      } else if (key == "config") {
        if (!v.is_object()) throw ConfigError("spec key 'config' must be an object");
        cfg.update(v);
      } else if (key == "detector") {
        static const char* detector_keys[] = {"p_detect",         "conf_mean",  "conf_spread",          "p_misclass",
                                              "p_false_positive", "noise_seed", "background_confidence"};
        if (!v.is_object()) throw ConfigError("spec key 'detector' must be an object");
        for (auto d = v.begin(); d != v.end(); ++d) {
          if (std::find(std::begin(detector_keys), std::end(detector_keys), d.key()) == std::end(detector_keys)) {
            throw ConfigError("unknown detector key '" + d.key() + "'");
          }
          cfg[d.key()] = d.value();
        }
      } else {
        throw ConfigError("unknown spec key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed spec: ") + e.what());
  }
  s.config = apply_config(cfg);
  if (!base_dir.empty() && std::filesystem::path(s.output_dir).is_relative()) {
    s.output_dir = (base_dir / s.output_dir).string();
  }
  s.validate();
  return s;
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("spec is not valid JSON: ") + e.what());
  }
  return parse_spec(j, std::filesystem::path(path).parent_path());
}

inline std::uint64_t planner_index(PlannerMode m) { return static_cast<std::uint64_t>(m); }

inline std::uint64_t run_seed(const ExperimentConfig& cfg, std::uint64_t scene_seed, PlannerMode mode,
                              std::uint64_t run_id) {
  return mix_seeds({cfg.detector.noise_seed, scene_seed, planner_index(mode), run_id});
}

inline TreeParams scene_params(ScenePreset preset, const ExperimentConfig& cfg) {
  TreeParams p = TreeParams::for_preset(preset);
  p.resolution = cfg.resolution;
  return p;
}

/// One seeded episode on a fresh map built with the config's fusion parameters.
struct SingleRun {
  EpisodeResult episode;
  SemanticOctree map;
};

inline SingleRun run_single(const SceneModel& scene, PlannerMode mode, const ExperimentConfig& cfg,
                            const ReachabilityGrid& reach, std::uint64_t run_id, int n_views) {
  SingleRun out{{}, cfg.make_map(scene.bounds())};
  Rng rng(run_seed(cfg, scene.seed(), mode, run_id));
  out.episode = run_episode(scene, out.map, mode, n_views, cfg.episode_settings(), reach, rng);
  return out;
}

// ---- CSV output ----

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Ordered "# key: value" lines written at the top of every CSV.
using Metadata = std::vector<std::pair<std::string, std::string>>;

inline Metadata base_metadata(const ExperimentConfig& cfg) {
  return {{"canopy_version", kVersion}, {"config_hash", config_hash(cfg)}, {"seed_derivation", kSeedDerivation}};
}

inline std::string metadata_block(const Metadata& meta) {
  std::string out;
  for (const auto& [k, v] : meta) out += "# " + k + ": " + v + "\n";
  out += "# generated_at: " + utc_timestamp() + "\n";
  return out;
}

/// Writes through a temporary file in the same directory, then renames over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline constexpr const char* kEpisodeHeader = "planner,scene_seed,run_id,viewpoint_index,precision,recall,f1,coverage,elapsed_s";
inline constexpr const char* kCurveHeader =
    "planner,viewpoint_index,mean_f1,std_f1,mean_coverage,std_coverage,mean_precision,mean_recall,runs";
inline constexpr const char* kSummaryHeader = "planner,n_views,mean_f1,std_f1,mean_coverage,std_coverage,runs,failed_runs";

inline std::string episode_csv(const std::vector<TrialRecord>& records, std::uint64_t scene_seed, std::uint64_t run_id,
                               const Metadata& meta) {
  std::string out = metadata_block(meta);
  out += kEpisodeHeader;
  out += '\n';
  for (const auto& r : records) {
    out += std::string(to_string(r.planner_mode)) + "," + std::to_string(scene_seed) + "," + std::to_string(run_id) +
           "," + std::to_string(r.viewpoint_index) + "," + fmt_num(r.precision) + "," + fmt_num(r.recall) + "," +
           fmt_num(r.f1) + "," + fmt_num(r.coverage) + "," + fmt_num(r.elapsed) + "\n";
  }
  return out;
}

inline std::string curve_csv(const AggregateCurve& c, const Metadata& meta) {
  std::string out = metadata_block(meta);
  out += kCurveHeader;
  out += '\n';
  for (const auto& p : c.points) {
    out += std::string(to_string(c.planner_mode)) + "," + std::to_string(p.viewpoint_index) + "," + fmt_num(p.mean_f1) +
           "," + fmt_num(p.std_f1) + "," + fmt_num(p.mean_coverage) + "," + fmt_num(p.std_coverage) + "," +
           fmt_num(p.mean_precision) + "," + fmt_num(p.mean_recall) + "," + std::to_string(c.run_count) + "\n";
  }
  return out;
}

inline std::string episode_filename(PlannerMode mode, std::uint64_t scene_seed, std::uint64_t run_id) {
  return std::string(to_string(mode)) + "_scene" + std::to_string(scene_seed) + "_run" + std::to_string(run_id) +
         ".csv";
}

// ---- compare ----

struct EpisodeOutcome {
  PlannerMode mode = PlannerMode::Baseline;
  std::uint64_t scene_seed = 0;
  std::uint64_t run_id = 0;
  bool ok = false;
  std::string error;
  EpisodeResult result;
};

struct SummaryRow {
  PlannerMode mode = PlannerMode::Baseline;
  CurvePoint final_point;
  std::size_t runs = 0;
  std::size_t failed = 0;
};

struct CompareResult {
  std::vector<EpisodeOutcome> episodes;  // scene-major, then planner, then run
  std::vector<AggregateCurve> curves;    // one per planner with completed runs
  std::vector<SummaryRow> summary;
  std::vector<std::string> warnings;
};

/// Runs every (scene, planner, run) combination, writes per-episode CSVs, per-planner
/// curves (per-scene means, then averaged across scenes) and a summary table.
/// Failed episodes are reported as warnings and left out of the aggregates.
inline CompareResult run_compare(const ExperimentSpec& spec, std::ostream* log = nullptr) {
  spec.validate();
  const ExperimentConfig& cfg = spec.config;
  const std::filesystem::path out_dir(spec.output_dir);
  std::filesystem::create_directories(out_dir / "episodes");

  CompareResult res;
  std::vector<std::optional<SceneModel>> scenes;
  for (auto seed : spec.scene_seeds) {
    try {
      scenes.emplace_back(generate_scene(seed, scene_params(spec.preset, cfg)));
    } catch (const std::exception& e) {
      scenes.emplace_back(std::nullopt);
      res.warnings.push_back("scene " + std::to_string(seed) + " failed to generate: " + e.what());
    }
  }
  const ReachabilityGrid reach = cfg.build_reach();

  for (std::size_t s = 0; s < spec.scene_seeds.size(); ++s) {
    for (auto mode : spec.planner_modes) {
      for (int r = 0; r < spec.runs_per_scene; ++r) {
        EpisodeOutcome o;
        o.mode = mode;
        o.scene_seed = spec.scene_seeds[s];
        o.run_id = static_cast<std::uint64_t>(r);
        res.episodes.push_back(std::move(o));
      }
    }
  }

  std::string seeds;
  for (auto seed : spec.scene_seeds) seeds += (seeds.empty() ? "" : " ") + std::to_string(seed);
  Metadata meta = base_metadata(cfg);
  meta.emplace_back("scene_seeds", seeds);
  meta.emplace_back("runs_per_scene", std::to_string(spec.runs_per_scene));
  meta.emplace_back("n_views", std::to_string(spec.n_views));
  meta.emplace_back("preset", to_string(spec.preset));

  std::mutex log_mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < res.episodes.size(); i = next++) {
      EpisodeOutcome& o = res.episodes[i];
      const std::size_t s = i / (spec.planner_modes.size() * static_cast<std::size_t>(spec.runs_per_scene));
      try {
        if (!scenes[s]) throw GenerationError("scene unavailable");
        auto run = run_single(*scenes[s], o.mode, cfg, reach, o.run_id, spec.n_views);
        if (run.episode.records.empty()) throw std::runtime_error(run.episode.note);
        o.result = std::move(run.episode);
        Metadata m = meta;
        m.emplace_back("scene_seed", std::to_string(o.scene_seed));
        m.emplace_back("run_id", std::to_string(o.run_id));
        m.emplace_back("run_seed", std::to_string(run_seed(cfg, o.scene_seed, o.mode, o.run_id)));
        if (o.result.exhausted) m.emplace_back("note", o.result.note);
        write_atomic(out_dir / "episodes" / episode_filename(o.mode, o.scene_seed, o.run_id),
                     episode_csv(o.result.records, o.scene_seed, o.run_id, m));
        o.ok = true;
      } catch (const std::exception& e) {
        o.ok = false;
        o.error = e.what();
      }
      if (log) {
        std::lock_guard lock(log_mu);
        *log << "[" << (i + 1) << "/" << res.episodes.size() << "] " << to_string(o.mode) << " scene " << o.scene_seed
             << " run " << o.run_id << (o.ok ? "" : " FAILED: " + o.error) << "\n";
      }
    }
  };
  const int n_threads = std::min<int>(spec.threads, static_cast<int>(res.episodes.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::string summary = metadata_block(meta) + kSummaryHeader + "\n";
  for (auto mode : spec.planner_modes) {
    std::vector<std::vector<std::vector<TrialRecord>>> by_scene;
    std::size_t failed = 0;
    for (auto seed : spec.scene_seeds) {
      std::vector<std::vector<TrialRecord>> runs;
      for (const auto& o : res.episodes) {
        if (o.mode != mode || o.scene_seed != seed) continue;
        if (o.ok) {
          runs.push_back(o.result.records);
        } else {
          ++failed;
          res.warnings.push_back(std::string(to_string(mode)) + " scene " + std::to_string(seed) + " run " +
                                 std::to_string(o.run_id) + " failed: " + o.error);
        }
      }
      if (!runs.empty()) by_scene.push_back(std::move(runs));
    }
    if (by_scene.empty()) {
      res.warnings.push_back(std::string(to_string(mode)) + ": no completed runs, no curve written");
      continue;
    }
    AggregateCurve curve = aggregate_by_scene(by_scene, static_cast<std::size_t>(spec.n_views));
    write_atomic(out_dir / ("curves_" + std::string(to_string(mode)) + ".csv"), curve_csv(curve, meta));
    SummaryRow row{mode, curve.points.back(), curve.run_count, failed};
    summary += std::string(to_string(mode)) + "," + std::to_string(row.final_point.viewpoint_index) + "," +
               fmt_num(row.final_point.mean_f1) + "," + fmt_num(row.final_point.std_f1) + "," +
               fmt_num(row.final_point.mean_coverage) + "," + fmt_num(row.final_point.std_coverage) + "," +
               std::to_string(row.runs) + "," + std::to_string(row.failed) + "\n";
    res.summary.push_back(row);
    res.curves.push_back(std::move(curve));
  }
  write_atomic(out_dir / "summary.csv", summary);
  return res;
}

inline void print_summary(const CompareResult& res, std::ostream& os) {
  char line[160];
  std::snprintf(line, sizeof line, "%-11s %6s %9s %9s %10s %10s %5s %6s\n", "planner", "views", "F1", "F1 std",
                "coverage", "cov std", "runs", "failed");
  os << line;
  for (const auto& r : res.summary) {
    std::snprintf(line, sizeof line, "%-11s %6d %9.4f %9.4f %10.4f %10.4f %5zu %6zu\n",
                  std::string(to_string(r.mode)).c_str(), r.final_point.viewpoint_index, r.final_point.mean_f1,
                  r.final_point.std_f1, r.final_point.mean_coverage, r.final_point.std_coverage, r.runs, r.failed);
    os << line;
  }
}

}  // namespace canopy
