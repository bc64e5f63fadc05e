#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <tuple>
#include <vector>

#include "canopy/errors.hpp"
#include "canopy/planner_mode.hpp"
#include "canopy/scene.hpp"
#include "canopy/semantic_octree.hpp"

namespace canopy {

struct EvaluationParams {
  double matching_radius = 0.10;
  int min_cluster_size = 1;
  double detection_confidence_threshold = 0.3;
};

struct PredictedCluster {
  int class_id = kNoClass;
  std::vector<VoxelKey> member_keys;
  Vec3 centroid = Vec3::Zero();
  double mean_confidence = 0.0;
};

/// 26-connected components of occupied, same-class, non-background voxels whose confidence
/// is at least `confidence_threshold`. Components below `min_cluster_size` are dropped.
/// Sorted by centroid (x, y, z), then class.
inline std::vector<PredictedCluster> extract_clusters(const SemanticOctree& map, int min_cluster_size = 1,
                                                      double confidence_threshold = 0.3) {
  if (min_cluster_size < 1) throw ContractViolation("min_cluster_size must be >= 1");
  const RoiBounds& b = map.bounds();
  auto qualifies = [&](std::size_t idx) {
    const SemanticVoxel& v = map.voxel_at(idx);
    return map.state_at(idx) == Occupancy::Occupied && v.has_semantics && v.class_id != kBackgroundClass &&
           v.confidence >= confidence_threshold;
  };

  std::vector<std::uint8_t> seen(b.voxel_count(), 0);
  std::vector<PredictedCluster> out;
  std::vector<VoxelKey> stack;
  for (std::size_t start = 0; start < b.voxel_count(); ++start) {
    if (seen[start] || !qualifies(start)) continue;
    const int cls = map.voxel_at(start).class_id;
    PredictedCluster c;
    c.class_id = cls;
    seen[start] = 1;
    stack.assign(1, b.key_at(start));
    while (!stack.empty()) {
      const VoxelKey k = stack.back();
      stack.pop_back();
      c.member_keys.push_back(k);
      for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dz = -1; dz <= 1; ++dz) {
            const VoxelKey n{k.ix + dx, k.iy + dy, k.iz + dz};
            if (!b.contains(n)) continue;
            const std::size_t idx = b.index_of(n);
            if (seen[idx] || !qualifies(idx) || map.voxel_at(idx).class_id != cls) continue;
            seen[idx] = 1;
            stack.push_back(n);
          }
        }
      }
    }
    if (static_cast<int>(c.member_keys.size()) < min_cluster_size) continue;
    std::sort(c.member_keys.begin(), c.member_keys.end());
    Vec3 sum = Vec3::Zero();
    double conf = 0.0;
    for (const auto& k : c.member_keys) {
      sum += b.center_of(k);
      conf += map.voxel(k).confidence;
    }
    c.centroid = sum / static_cast<double>(c.member_keys.size());
    c.mean_confidence = conf / static_cast<double>(c.member_keys.size());
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const PredictedCluster& a, const PredictedCluster& b) {
    return std::tie(a.centroid.x(), a.centroid.y(), a.centroid.z(), a.class_id) <
           std::tie(b.centroid.x(), b.centroid.y(), b.centroid.z(), b.class_id);
  });
  return out;
}

struct MatchResult {
  int tp_p = 0;
  int fp = 0;
  int tp_c = 0;
  int fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// For each cluster, the indices of the same-class truths within the radius.
  std::vector<std::vector<int>> matches;
};

/// Many-to-many radius matching: a cluster is a true positive if any same-class truth lies
/// within `radius` of its centroid, and a truth is recovered if any such cluster exists.
/// Zero denominators give zero precision/recall, and F1 is zero when both are zero.
inline MatchResult score(std::span<const PredictedCluster> clusters, std::span<const SymptomInstance> truth,
                         double radius) {
  if (!(radius > 0.0)) throw ContractViolation("matching radius must be positive");
  MatchResult r;
  r.matches.resize(clusters.size());
  std::vector<std::uint8_t> truth_hit(truth.size(), 0);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (std::size_t t = 0; t < truth.size(); ++t) {
      if (truth[t].class_id != clusters[c].class_id) continue;
      if ((truth[t].centroid - clusters[c].centroid).norm() <= radius) {
        r.matches[c].push_back(static_cast<int>(t));
        truth_hit[t] = 1;
      }
    }
    if (r.matches[c].empty()) {
      ++r.fp;
    } else {
      ++r.tp_p;
    }
  }
  r.tp_c = static_cast<int>(std::count(truth_hit.begin(), truth_hit.end(), std::uint8_t{1}));
  r.fn = static_cast<int>(truth.size()) - r.tp_c;
  r.precision = (r.tp_p + r.fp) > 0 ? static_cast<double>(r.tp_p) / (r.tp_p + r.fp) : 0.0;
  r.recall = (r.tp_c + r.fn) > 0 ? static_cast<double>(r.tp_c) / (r.tp_c + r.fn) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

/// Metric snapshot after one executed viewpoint.
struct TrialRecord {
  int viewpoint_index = 0;  // 1-based
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double coverage = 0.0;
  double elapsed = 0.0;  // seconds
  PlannerMode planner_mode = PlannerMode::Baseline;
};

struct CurvePoint {
  int viewpoint_index = 0;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  double mean_coverage = 0.0;
  double std_coverage = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
};

struct AggregateCurve {
  PlannerMode planner_mode = PlannerMode::Baseline;
  std::size_t run_count = 0;
  std::vector<CurvePoint> points;
};

namespace detail {

inline std::size_t checked_length(std::span<const std::vector<TrialRecord>> runs, PlannerMode& mode) {
  if (runs.empty()) throw ContractViolation("aggregate needs at least one run");
  std::size_t len = 0;
  mode = PlannerMode::Baseline;
  bool first = true;
  for (const auto& run : runs) {
    if (run.empty()) throw ContractViolation("aggregate got an empty run");
    for (const auto& rec : run) {
      if (first) {
        mode = rec.planner_mode;
        first = false;
      } else if (rec.planner_mode != mode) {
        throw ContractViolation("aggregate runs mix planner modes");
      }
    }
    len = std::max(len, run.size());
  }
  return len;
}

inline const TrialRecord& padded(const std::vector<TrialRecord>& run, std::size_t i) {
  return i < run.size() ? run[i] : run.back();
}

}  // namespace detail

/// Per-viewpoint mean and population standard deviation across runs. Short runs are padded
/// by repeating their final record up to the longest run (or `pad_to`, if larger).
inline AggregateCurve aggregate(std::span<const std::vector<TrialRecord>> runs, std::size_t pad_to = 0) {
  AggregateCurve curve;
  const std::size_t len = std::max(detail::checked_length(runs, curve.planner_mode), pad_to);
  curve.run_count = runs.size();
  const double n = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < len; ++i) {
    CurvePoint p;
    p.viewpoint_index = static_cast<int>(i) + 1;
    for (const auto& run : runs) {
      const auto& r = detail::padded(run, i);
      p.mean_f1 += r.f1;
      p.mean_coverage += r.coverage;
      p.mean_precision += r.precision;
      p.mean_recall += r.recall;
    }
    p.mean_f1 /= n;
    p.mean_coverage /= n;
    p.mean_precision /= n;
    p.mean_recall /= n;
    double vf = 0.0;
    double vc = 0.0;
    for (const auto& run : runs) {
      const auto& r = detail::padded(run, i);
      vf += (r.f1 - p.mean_f1) * (r.f1 - p.mean_f1);
      vc += (r.coverage - p.mean_coverage) * (r.coverage - p.mean_coverage);
    }
    p.std_f1 = std::sqrt(vf / n);
    p.std_coverage = std::sqrt(vc / n);
    curve.points.push_back(p);
  }
  return curve;
}

/// Two-level roll-up: runs are averaged per scene first, then the per-scene curves are
/// averaged. The reported spread is the root mean of the per-scene variances.
inline AggregateCurve aggregate_by_scene(std::span<const std::vector<std::vector<TrialRecord>>> runs_by_scene,
                                         std::size_t pad_to = 0) {
  if (runs_by_scene.empty()) throw ContractViolation("aggregate needs at least one scene");
  std::size_t len = pad_to;
  for (const auto& scene_runs : runs_by_scene) {
    PlannerMode m;
    len = std::max(len, detail::checked_length(scene_runs, m));
  }
  std::vector<AggregateCurve> per_scene;
  for (const auto& scene_runs : runs_by_scene) per_scene.push_back(aggregate(scene_runs, len));

  AggregateCurve curve;
  curve.planner_mode = per_scene.front().planner_mode;
  const double n = static_cast<double>(per_scene.size());
  for (const auto& c : per_scene) {
    if (c.planner_mode != curve.planner_mode) throw ContractViolation("aggregate scenes mix planner modes");
    curve.run_count += c.run_count;
  }
  for (std::size_t i = 0; i < len; ++i) {
    CurvePoint p;
    p.viewpoint_index = static_cast<int>(i) + 1;
    double vf = 0.0;
    double vc = 0.0;
    for (const auto& c : per_scene) {
      p.mean_f1 += c.points[i].mean_f1;
      p.mean_coverage += c.points[i].mean_coverage;
      p.mean_precision += c.points[i].mean_precision;
      p.mean_recall += c.points[i].mean_recall;
      vf += c.points[i].std_f1 * c.points[i].std_f1;
      vc += c.points[i].std_coverage * c.points[i].std_coverage;
    }
    p.mean_f1 /= n;
    p.mean_coverage /= n;
    p.mean_precision /= n;
    p.mean_recall /= n;
    p.std_f1 = std::sqrt(vf / n);
    p.std_coverage = std::sqrt(vc / n);
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace canopy
