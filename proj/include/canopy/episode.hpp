#pragma once

#include <optional>
#include <string>
#include <vector>

#include "canopy/evaluation.hpp"
#include "canopy/nbv.hpp"
#include "canopy/reachability.hpp"
#include "canopy/scene.hpp"
#include "canopy/semantic_octree.hpp"
#include "canopy/sensor.hpp"

namespace canopy {

struct EpisodeSettings {
  PlannerConfig planner;
  CameraModel camera;
  DetectorModel detector;
  EvaluationParams evaluation;
  /// Nominal camera speed used to turn travelled distance into simulated mission time.
  double travel_speed = 0.1;
};

struct EpisodeResult {
  std::vector<TrialRecord> records;
  std::vector<CameraPose> poses;
  /// The planner ran out of views (grid exhausted or no feasible NBV) before n_views.
  bool exhausted = false;
  std::string note;
};

/// Rejects candidates whose camera position lies inside a voxel the map believes occupied.
inline MotionChecker occupied_space_checker(const SemanticOctree& map) {
  return [&map](const Viewpoint& v) {
    const auto k = map.bounds().key_of(v.pose.position);
    return !k || map.occupancy_state(*k) != Occupancy::Occupied;
  };
}

inline TrialRecord evaluate_map(const SemanticOctree& map, const SceneModel& scene, const EvaluationParams& eval,
                                int viewpoint_index, double elapsed, PlannerMode mode) {
  const auto clusters = extract_clusters(map, eval.min_cluster_size, eval.detection_confidence_threshold);
  const auto m = score(clusters, scene.symptoms(), eval.matching_radius);
  TrialRecord rec;
  rec.viewpoint_index = viewpoint_index;
  rec.precision = m.precision;
  rec.recall = m.recall;
  rec.f1 = m.f1;
  rec.coverage = map.coverage();
  rec.elapsed = elapsed;
  rec.planner_mode = mode;
  return rec;
}

/// Closed perception-action loop: observe, integrate, score, then pick the next pose.
///
/// Every planner starts at the first reachable midplane-grid pose. The baseline walks the
/// reachable grid in boustrophedon order; the NBV modes call select_next_view. The episode
/// stops early when the grid is exhausted or no feasible NBV candidate remains.
inline EpisodeResult run_episode(const SceneModel& scene, SemanticOctree& map, PlannerMode mode, int n_views,
                                 const EpisodeSettings& settings, const ReachabilityGrid& reach, Rng& rng,
                                 MotionChecker checker = {}) {
  if (n_views < 1) throw ContractViolation("n_views must be >= 1");
  if (!checker) checker = occupied_space_checker(map);
  const auto& cfg = settings.planner;
  const auto grid = filter_feasible(
      baseline_grid(map.bounds(), settings.camera, cfg.stand_off, cfg.overlap, cfg.view_direction), reach);

  EpisodeResult result;
  if (grid.empty()) {
    result.exhausted = true;
    result.note = "no reachable grid viewpoint";
    return result;
  }

  CameraPose pose = grid.front().pose;
  double elapsed = 0.0;
  for (int i = 0; i < n_views; ++i) {
    const auto cloud = render_view(scene, pose, settings.camera, settings.detector, rng);
    map.insert_point_cloud(pose.position, cloud);
    result.poses.push_back(pose);
    result.records.push_back(evaluate_map(map, scene, settings.evaluation, i + 1, elapsed, mode));
    if (i + 1 == n_views) break;

    std::optional<CameraPose> next;
    if (mode == PlannerMode::Baseline) {
      if (static_cast<std::size_t>(i + 1) < grid.size()) next = grid[static_cast<std::size_t>(i + 1)].pose;
    } else if (auto v = select_next_view(map, pose, cfg, mode, reach, settings.camera, rng, checker)) {
      next = v->pose;
    }
    if (!next) {
      result.exhausted = true;
      result.note = mode == PlannerMode::Baseline
                        ? "baseline grid exhausted after " + std::to_string(i + 1) + " viewpoints"
                        : "no feasible NBV candidate after " + std::to_string(i + 1) + " viewpoints";
      break;
    }
    elapsed += (next->position - pose.position).norm() / settings.travel_speed;
    pose = *next;
  }
  return result;
}

}  // namespace canopy
