#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "canopy/errors.hpp"
#include "canopy/ray_traversal.hpp"
#include "canopy/voxel_grid.hpp"

namespace canopy {

inline constexpr int kBackgroundClass = 0;
inline constexpr int kShepherdsCrook = 1;
inline constexpr int kCanker = 2;
inline constexpr int kNoClass = -1;

enum class Occupancy : std::uint8_t { Unknown, Free, Occupied };

/// Per-voxel payload: occupancy evidence plus the fused semantic estimate.
struct SemanticVoxel {
  double log_odds = 0.0;
  int class_id = kNoClass;
  double confidence = 0.0;
  bool has_semantics = false;
  /// False until the first occupancy update; an unobserved voxel is unknown.
  bool observed = false;

  friend bool operator==(const SemanticVoxel&, const SemanticVoxel&) = default;
};

/// A lifted detection: a 3D point with the label and confidence of the pixel it came from.
struct SemanticPoint {
  Vec3 position = Vec3::Zero();
  int class_id = kBackgroundClass;
  double confidence = 0.0;
  /// Invalid or out-of-range pixel kept as background at the maximum sensing range.
  bool is_max_range = false;
};

struct FusionParams {
  double gamma = 0.05;   // same-label confidence boost
  double lambda = 0.1;   // disagreement penalty
  double background_confidence = 0.3;
  double hit_log_odds = 0.85;
  double miss_log_odds = -0.4;
  double clamp_min = -2.0;
  double clamp_max = 3.5;
  double occupancy_threshold = 0.0;

  void validate() const {
    if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0,1]");
    if (!(background_confidence >= 0.0 && background_confidence <= 1.0)) {
      throw ConfigError("background_confidence must lie in [0,1]");
    }
    if (!(hit_log_odds > 0.0) || !(miss_log_odds < 0.0)) {
      throw ConfigError("hit_log_odds must be > 0 and miss_log_odds < 0");
    }
    if (!(clamp_min < clamp_max)) throw ConfigError("clamp_min must be below clamp_max");
    if (!(occupancy_threshold >= clamp_min && occupancy_threshold <= clamp_max)) {
      throw ConfigError("occupancy_threshold must lie within the clamp range");
    }
  }

  friend bool operator==(const FusionParams&, const FusionParams&) = default;
};

/// Confidence-aware label fusion for an occupied voxel.
///
/// Matching labels average the confidences and add gamma. On disagreement the
/// higher-confidence label is kept (ties keep the stored one) and the surviving
/// confidence is scaled by (1 - lambda), whichever side won.
inline SemanticVoxel fuse_semantic(SemanticVoxel voxel, int incoming_class, double incoming_conf,
                                   const FusionParams& params) {
  if (!(incoming_conf >= 0.0 && incoming_conf <= 1.0)) {
    throw ContractViolation("incoming confidence must lie in [0,1]");
  }
  if (!voxel.has_semantics) {
    voxel.class_id = incoming_class;
    voxel.confidence = incoming_conf;
    voxel.has_semantics = true;
    return voxel;
  }
  if (incoming_class == voxel.class_id) {
    voxel.confidence = std::clamp((voxel.confidence + incoming_conf) / 2.0 + params.gamma, 0.0, 1.0);
    return voxel;
  }
  if (incoming_conf > voxel.confidence) {
    voxel.class_id = incoming_class;
    voxel.confidence = incoming_conf;
  }
  voxel.confidence = std::clamp(voxel.confidence * (1.0 - params.lambda), 0.0, 1.0);
  return voxel;
}

struct InsertStats {
  std::size_t free_updates = 0;
  std::size_t occupied_updates = 0;
  std::size_t semantic_updates = 0;
  std::size_t rejected_points = 0;
};

enum class RayTerminal : std::uint8_t { Hit, MaxRange, ExitedRoi };

struct RayResult {
  RayTerminal terminal = RayTerminal::ExitedRoi;
  std::optional<VoxelKey> hit;
  std::vector<VoxelKey> traversed;
  /// Distance from the origin to where the walk stopped (entry of the hit voxel on a hit).
  double distance = 0.0;
};

/// Bounded semantic occupancy map.
///
/// Stored as a flat dense grid over the ROI rather than a pointer octree; the ROI is
/// small and fixed, and every query the planners need is a per-voxel lookup.
/// Writers (insert_point_cloud, apply_occupancy_update, set_voxel) must be externally
/// serialized; const members may run concurrently when no writer is active.
class SemanticOctree {
 public:
  explicit SemanticOctree(RoiBounds bounds, FusionParams params = {})
      : bounds_(std::move(bounds)), params_(params), voxels_(bounds_.voxel_count()), stamp_(bounds_.voxel_count(), 0),
        best_point_(bounds_.voxel_count(), 0) {
    params_.validate();
  }

  const RoiBounds& bounds() const { return bounds_; }
  const FusionParams& params() const { return params_; }

  /// Integrates one sensor sweep taken from `origin`.
  ///
  /// Within a call each voxel receives at most one miss and at most one hit, and a hit
  /// suppresses the miss. Each endpoint voxel that is occupied after the geometric update
  /// then takes one semantic observation: its highest-confidence point (first on ties).
  InsertStats insert_point_cloud(const Vec3& origin, std::span<const SemanticPoint> points) {
    InsertStats stats;
    if (points.empty()) return stats;
    if (!origin.allFinite()) {
      stats.rejected_points = points.size();
      return stats;
    }
    if (++epoch_ >= 0x7fffffffU) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      epoch_ = 1;
    }
    // Per-call marks: a stamp below free_mark means "untouched in this call".
    const std::uint32_t free_mark = 2 * epoch_;
    const std::uint32_t hit_mark = 2 * epoch_ + 1;
    free_list_.clear();
    hit_list_.clear();

    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      if (!p.position.allFinite() || !(p.confidence >= 0.0 && p.confidence <= 1.0)) {
        ++stats.rejected_points;
        continue;
      }
      const Vec3 delta = p.position - origin;
      const double len = delta.norm();
      std::optional<VoxelKey> end_key;
      if (!p.is_max_range) end_key = bounds_.key_of(p.position);
      if (len > 0.0) {
        const Vec3 dir = delta / len;
        traverse_ray(bounds_, origin, dir, len, [&](const VoxelKey& k, double, double) {
          if (end_key && k == *end_key) return true;
          const std::size_t idx = bounds_.index_of(k);
          if (stamp_[idx] < free_mark) {
            stamp_[idx] = free_mark;
            free_list_.push_back(idx);
          }
          return true;
        });
      }
      if (end_key) {
        const std::size_t idx = bounds_.index_of(*end_key);
        if (stamp_[idx] != hit_mark) {
          stamp_[idx] = hit_mark;
          hit_list_.push_back(idx);
          best_point_[idx] = i;
        } else if (p.confidence > points[best_point_[idx]].confidence) {
          best_point_[idx] = i;
        }
      }
    }

    for (std::size_t idx : free_list_) {
      if (stamp_[idx] == hit_mark) continue;
      update_index(idx, params_.miss_log_odds);
      ++stats.free_updates;
    }
    for (std::size_t idx : hit_list_) {
      update_index(idx, params_.hit_log_odds);
      ++stats.occupied_updates;
    }
    for (std::size_t idx : hit_list_) {
      const auto& p = points[best_point_[idx]];
      SemanticVoxel& v = voxels_[idx];
      if (state_of(v) != Occupancy::Occupied) continue;
      v = fuse_semantic(v, p.class_id, p.confidence, params_);
      ++stats.semantic_updates;
    }
    return stats;
  }

  /// Adds `delta` to a voxel's log-odds (clamped) and marks it observed. Semantics are
  /// dropped if the voxel is no longer occupied afterwards.
  void apply_occupancy_update(const VoxelKey& key, double delta) {
    check(key);
    update_index(bounds_.index_of(key), delta);
  }

  /// Overwrites a voxel wholesale (snapshot loading, test fixtures). Keeps the known
  /// counter consistent; does not enforce semantic gating.
  void set_voxel(const VoxelKey& key, const SemanticVoxel& v) {
    check(key);
    SemanticVoxel& dst = voxels_[bounds_.index_of(key)];
    if (dst.observed && !v.observed) --known_count_;
    if (!dst.observed && v.observed) ++known_count_;
    dst = v;
  }

  const SemanticVoxel& voxel(const VoxelKey& key) const {
    check(key);
    return voxels_[bounds_.index_of(key)];
  }

  Occupancy occupancy_state(const VoxelKey& key) const {
    check(key);
    return state_of(voxels_[bounds_.index_of(key)]);
  }

  /// Unchecked lookup by linear index, for hot loops that already hold a valid key.
  Occupancy state_at(std::size_t index) const { return state_of(voxels_[index]); }
  const SemanticVoxel& voxel_at(std::size_t index) const { return voxels_[index]; }

  /// Known voxels with at least one unknown face neighbour inside the ROI, in key order.
  std::vector<VoxelKey> frontier_voxels() const {
    std::vector<VoxelKey> out;
    const auto& d = bounds_.dims();
    for (int x = 0; x < d[0]; ++x) {
      for (int y = 0; y < d[1]; ++y) {
        for (int z = 0; z < d[2]; ++z) {
          const VoxelKey k{x, y, z};
          if (!voxels_[bounds_.index_of(k)].observed) continue;
          for (const auto& off : kFaceNeighbors) {
            const VoxelKey n = k + off;
            if (bounds_.contains(n) && !voxels_[bounds_.index_of(n)].observed) {
              out.push_back(k);
              break;
            }
          }
        }
      }
    }
    return out;
  }

  /// Occupied voxels carrying a non-background label with confidence below `threshold`, in key order.
  std::vector<VoxelKey> low_confidence_voxels(double threshold) const {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ContractViolation("threshold must lie in [0,1]");
    std::vector<VoxelKey> out;
    const auto& d = bounds_.dims();
    for (int x = 0; x < d[0]; ++x) {
      for (int y = 0; y < d[1]; ++y) {
        for (int z = 0; z < d[2]; ++z) {
          const VoxelKey k{x, y, z};
          const SemanticVoxel& v = voxels_[bounds_.index_of(k)];
          if (state_of(v) == Occupancy::Occupied && v.has_semantics && v.class_id != kBackgroundClass &&
              v.confidence < threshold) {
            out.push_back(k);
          }
        }
      }
    }
    return out;
  }

  std::size_t known_count() const { return known_count_; }

  double coverage() const {
    return static_cast<double>(known_count_) / static_cast<double>(bounds_.voxel_count());
  }

  /// Walks from `origin` along `direction` until the first occupied voxel, `max_range`,
  /// or the ROI boundary.
  RayResult cast_ray(const Vec3& origin, const Vec3& direction, double max_range) const {
    const double n = direction.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw ContractViolation("ray direction must be non-zero");
    if (!(max_range > 0.0)) throw ContractViolation("max_range must be positive");
    const Vec3 dir = direction / n;
    RayResult r;
    double t_last_exit = 0.0;
    traverse_ray(bounds_, origin, dir, max_range, [&](const VoxelKey& k, double t_in, double t_out) {
      r.traversed.push_back(k);
      t_last_exit = t_out;
      if (state_of(voxels_[bounds_.index_of(k)]) == Occupancy::Occupied) {
        r.terminal = RayTerminal::Hit;
        r.hit = k;
        r.distance = t_in;
        return false;
      }
      return true;
    });
    if (!r.hit) {
      // The walk ends either because the clipped segment reached max_range or because it left the box.
      double t0 = 0.0;
      double t1 = max_range;
      const bool inside = clip_to_box(bounds_, origin, dir, t0, t1);
      r.terminal = (inside && t1 >= max_range) ? RayTerminal::MaxRange : RayTerminal::ExitedRoi;
      r.distance = r.traversed.empty() ? 0.0 : t_last_exit;
    }
    return r;
  }

  template <class F>
  void for_each_observed(F&& f) const {
    for (std::size_t i = 0; i < voxels_.size(); ++i) {
      if (voxels_[i].observed) f(bounds_.key_at(i), voxels_[i]);
    }
  }

 private:
  Occupancy state_of(const SemanticVoxel& v) const {
    if (!v.observed) return Occupancy::Unknown;
    return v.log_odds >= params_.occupancy_threshold ? Occupancy::Occupied : Occupancy::Free;
  }

  void check(const VoxelKey& key) const {
    if (!bounds_.contains(key)) throw OutOfBounds("voxel key " + to_string(key) + " outside ROI");
  }

  void update_index(std::size_t idx, double delta) {
    SemanticVoxel& v = voxels_[idx];
    if (!v.observed) {
      v.observed = true;
      ++known_count_;
    }
    v.log_odds = std::clamp(v.log_odds + delta, params_.clamp_min, params_.clamp_max);
    if (state_of(v) != Occupancy::Occupied && v.has_semantics) {
      v.has_semantics = false;
      v.class_id = kNoClass;
      v.confidence = 0.0;
    }
  }

  RoiBounds bounds_;
  FusionParams params_;
  std::vector<SemanticVoxel> voxels_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
  std::size_t known_count_ = 0;
  std::vector<std::size_t> free_list_;
  std::vector<std::size_t> hit_list_;
  std::vector<std::size_t> best_point_;
};

}  // namespace canopy
