#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <tuple>
#include <vector>

#include "canopy/camera.hpp"
#include "canopy/clustering.hpp"
#include "canopy/information_gain.hpp"
#include "canopy/planner_mode.hpp"
#include "canopy/random.hpp"
#include "canopy/reachability.hpp"
#include "canopy/semantic_octree.hpp"
#include "canopy/viewpoints.hpp"

namespace canopy {

struct PlannerConfig {
  double alpha = 0.1;  // utility cost weight
  double beta = 0.7;   // semantic weight
  double tau_c = 0.6;  // low-confidence threshold
  double overlap = 0.2;
  double stand_off = 0.5;
  int cluster_cap = 100;
  int hemisphere_samples = 8;
  double radial_min = 0.35;  // 0.7 * stand_off
  double radial_max = 0.6;   // 1.2 * stand_off
  int ig_ray_rows = 18;
  int ig_ray_cols = 24;
  double cone_half_angle = deg2rad(15.0);
  int perturbations_per_view = 3;
  Vec3 view_direction = Vec3::UnitX();

  void validate() const {
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0,1]");
    if (!(tau_c >= 0.0 && tau_c <= 1.0)) throw ConfigError("tau_c must lie in [0,1]");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("overlap must lie in [0,1)");
    if (!(stand_off > 0.0)) throw ConfigError("stand_off must be positive");
    if (cluster_cap < 1) throw ConfigError("cluster_cap must be >= 1");
    if (hemisphere_samples < 0) throw ConfigError("hemisphere_samples must be >= 0");
    if (!(radial_min > 0.0 && radial_min <= stand_off && stand_off <= radial_max)) {
      throw ConfigError("radial range must satisfy 0 < min <= stand_off <= max");
    }
    if (ig_ray_rows < 1 || ig_ray_cols < 1) throw ConfigError("IG ray grid must be at least 1x1");
    if (!(cone_half_angle > 0.0 && cone_half_angle < std::numbers::pi / 2.0)) {
      throw ConfigError("cone half-angle must lie in (0, 90) degrees");
    }
    if (perturbations_per_view < 0) throw ConfigError("perturbations_per_view must be >= 0");
    if (!(view_direction.norm() > 0.0)) throw ConfigError("view direction must be non-zero");
  }
};

/// Accepts or rejects a ranked candidate (stand-in for a motion planner). Empty = accept all.
using MotionChecker = std::function<bool(const Viewpoint&)>;

/// Perturbed midplane grid plus hemisphere samples around clusters of frontier voxels
/// (volumetric) or low-confidence symptom voxels (semantic, falling back to frontiers when
/// none exist). Not yet filtered or scored.
inline std::vector<Viewpoint> generate_candidates(const SemanticOctree& map, const PlannerConfig& cfg, PlannerMode mode,
                                                  const CameraModel& camera, Rng& rng) {
  const auto base = baseline_grid(map.bounds(), camera, cfg.stand_off, cfg.overlap, cfg.view_direction);
  std::vector<Viewpoint> out = perturbed_grid(base, cfg.cone_half_angle, cfg.perturbations_per_view, rng);

  std::vector<VoxelKey> targets;
  ViewpointSource source = ViewpointSource::FrontierCluster;
  if (mode == PlannerMode::Semantic) {
    targets = map.low_confidence_voxels(cfg.tau_c);
    source = ViewpointSource::SemanticCluster;
  }
  if (targets.empty()) {
    targets = map.frontier_voxels();
    source = ViewpointSource::FrontierCluster;
  }
  const Vec3 facing = -cfg.view_direction.normalized();
  for (const auto& c : cluster_voxels(map.bounds(), targets, cfg.cluster_cap, rng)) {
    auto samples = hemisphere_sample(c.centroid, facing, cfg.radial_min, cfg.radial_max, cfg.hemisphere_samples, rng,
                                     source);
    out.insert(out.end(), samples.begin(), samples.end());
  }
  return out;
}

/// Sets cost = distance from `current`, gain per the mode, utility = gain - alpha * cost.
inline void score_candidates(std::vector<Viewpoint>& candidates, const SemanticOctree& map, const CameraPose& current,
                             const PlannerConfig& cfg, PlannerMode mode, const GainRays& rays) {
  const double beta = mode == PlannerMode::Semantic ? cfg.beta : 0.0;
  for (auto& v : candidates) {
    v.gain = blended_gain(v.pose, map, rays, beta);
    v.cost = (v.pose.position - current.position).norm();
    v.utility = v.gain - cfg.alpha * v.cost;
  }
}

/// Utility descending; ties by smaller cost, then lexicographic position.
inline void rank_viewpoints(std::vector<Viewpoint>& candidates) {
  std::stable_sort(candidates.begin(), candidates.end(), [](const Viewpoint& a, const Viewpoint& b) {
    if (a.utility != b.utility) return a.utility > b.utility;
    if (a.cost != b.cost) return a.cost < b.cost;
    const Vec3& p = a.pose.position;
    const Vec3& q = b.pose.position;
    return std::tie(p.x(), p.y(), p.z()) < std::tie(q.x(), q.y(), q.z());
  });
}

/// First ranked candidate the motion checker accepts.
inline std::optional<Viewpoint> first_feasible(const std::vector<Viewpoint>& ranked, const MotionChecker& checker) {
  for (const auto& v : ranked) {
    if (!checker || checker(v)) return v;
  }
  return std::nullopt;
}

/// One greedy NBV step: generate, filter by reachability, score, rank, then walk the
/// ranking until the motion checker accepts. `scored` (optional) receives the ranked list.
inline std::optional<Viewpoint> select_next_view(const SemanticOctree& map, const CameraPose& current,
                                                 const PlannerConfig& cfg, PlannerMode mode,
                                                 const ReachabilityGrid& reach, const CameraModel& camera, Rng& rng,
                                                 const MotionChecker& checker = {},
                                                 std::vector<Viewpoint>* scored = nullptr) {
  if (mode == PlannerMode::Baseline) throw ContractViolation("select_next_view needs an NBV planner mode");
  auto candidates = filter_feasible(generate_candidates(map, cfg, mode, camera, rng), reach);
  const GainRays rays(camera.with_ray_grid(cfg.ig_ray_rows, cfg.ig_ray_cols));
  score_candidates(candidates, map, current, cfg, mode, rays);
  rank_viewpoints(candidates);
  auto choice = first_feasible(candidates, checker);
  if (scored) *scored = std::move(candidates);
  return choice;
}

}  // namespace canopy
