#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "canopy/camera.hpp"
#include "canopy/errors.hpp"
#include "canopy/random.hpp"
#include "canopy/ray_traversal.hpp"
#include "canopy/semantic_octree.hpp"
#include "canopy/viewpoints.hpp"
#include "canopy/voxel_grid.hpp"

namespace canopy {

enum class ScenePreset : std::uint8_t { Orchard, Lab };

inline std::string to_string(ScenePreset p) { return p == ScenePreset::Lab ? "lab" : "orchard"; }

inline ScenePreset parse_preset(const std::string& s) {
  if (s == "orchard") return ScenePreset::Orchard;
  if (s == "lab") return ScenePreset::Lab;
  throw ConfigError("unknown scene preset '" + s + "' (expected orchard or lab)");
}

/// Shape parameters for the procedural tree. The robot base sits at the world origin and
/// the camera looks along +x toward a trunk standing at `base`.
struct TreeParams {
  ScenePreset preset = ScenePreset::Orchard;
  double resolution = 0.04;
  Vec3 base{1.0, 0.0, 0.3};
  double trunk_height = 1.15;
  double trunk_radius = 0.05;
  int levels_min = 2;  // branching levels below the trunk
  int levels_max = 4;
  int scaffold_min = 4;  // first-level branches off the trunk
  int scaffold_max = 6;
  int children_min = 2;
  int children_max = 3;
  double scaffold_length = 0.45;
  double length_decay = 0.6;
  double radius_decay = 0.55;
  double min_radius = 0.008;
  /// Scales the along-view component of branch directions; < 1 flattens the canopy.
  double depth_scale = 1.0;
  int crooks_min = 5;
  int crooks_max = 8;
  int cankers_min = 5;
  int cankers_max = 8;
  int symptom_voxels_max = 4;
  double min_symptom_separation = 0.2;
  bool require_occluded = true;
  /// Midplane observer grid used for the occlusion requirement.
  CameraModel observer_camera{};
  double observer_stand_off = 0.5;
  double observer_overlap = 0.2;
  Vec3 view_direction = Vec3::UnitX();

  static TreeParams orchard() { return TreeParams{}; }

  /// Sparse, shallow canopy carrying six shepherd's crooks and no cankers.
  static TreeParams lab() {
    TreeParams p;
    p.preset = ScenePreset::Lab;
    p.levels_min = 2;
    p.levels_max = 2;
    p.scaffold_min = 4;
    p.scaffold_max = 4;
    p.depth_scale = 0.15;
    p.crooks_min = p.crooks_max = 6;
    p.cankers_min = p.cankers_max = 0;
    p.require_occluded = false;
    return p;
  }

  static TreeParams for_preset(ScenePreset preset) { return preset == ScenePreset::Lab ? lab() : orchard(); }
};

struct SymptomInstance {
  int class_id = kShepherdsCrook;
  Vec3 centroid = Vec3::Zero();
  std::vector<VoxelKey> voxels;
};

/// Ground-truth tree: occupied geometry voxels plus the symptom instances placed on them.
/// Immutable once built.
class SceneModel {
 public:
  static constexpr int kEmpty = -1;
  static constexpr int kPlain = 0;

  SceneModel(RoiBounds bounds, std::vector<VoxelKey> geometry, std::vector<SymptomInstance> symptoms,
             std::uint64_t seed, TreeParams params)
      : bounds_(std::move(bounds)),
        geometry_(std::move(geometry)),
        symptoms_(std::move(symptoms)),
        seed_(seed),
        params_(std::move(params)),
        cells_(bounds_.voxel_count(), kEmpty) {
    std::sort(geometry_.begin(), geometry_.end());
    geometry_.erase(std::unique(geometry_.begin(), geometry_.end()), geometry_.end());
    for (const auto& k : geometry_) {
      if (!bounds_.contains(k)) throw FormatError("scene geometry voxel " + to_string(k) + " outside bounds");
      cells_[bounds_.index_of(k)] = kPlain;
    }
    for (std::size_t s = 0; s < symptoms_.size(); ++s) {
      auto& sym = symptoms_[s];
      if (sym.class_id != kShepherdsCrook && sym.class_id != kCanker) throw FormatError("symptom class must be 1 or 2");
      if (sym.voxels.empty()) throw FormatError("symptom without voxels");
      for (const auto& k : sym.voxels) {
        if (!bounds_.contains(k) || cells_[bounds_.index_of(k)] != kPlain) {
          throw FormatError("symptom voxel " + to_string(k) + " is not a free geometry voxel");
        }
        cells_[bounds_.index_of(k)] = static_cast<int>(s) + 1;
      }
      Vec3 c = Vec3::Zero();
      for (const auto& k : sym.voxels) c += bounds_.center_of(k);
      sym.centroid = c / static_cast<double>(sym.voxels.size());
    }
  }

  const RoiBounds& bounds() const { return bounds_; }
  const std::vector<VoxelKey>& geometry() const { return geometry_; }
  const std::vector<SymptomInstance>& symptoms() const { return symptoms_; }
  std::uint64_t seed() const { return seed_; }
  const TreeParams& params() const { return params_; }

  bool occupied(const VoxelKey& k) const { return bounds_.contains(k) && cells_[bounds_.index_of(k)] != kEmpty; }
  /// Symptom index owning the voxel, or -1.
  int symptom_at(const VoxelKey& k) const {
    if (!bounds_.contains(k)) return -1;
    return cells_[bounds_.index_of(k)] - 1;
  }
  int cell_at(std::size_t index) const { return cells_[index]; }

  std::size_t count_class(int class_id) const {
    return static_cast<std::size_t>(
        std::count_if(symptoms_.begin(), symptoms_.end(), [&](const auto& s) { return s.class_id == class_id; }));
  }

 private:
  RoiBounds bounds_;
  std::vector<VoxelKey> geometry_;
  std::vector<SymptomInstance> symptoms_;
  std::uint64_t seed_;
  TreeParams params_;
  std::vector<int> cells_;
};

/// True if some straight segment from an observer position reaches one of the voxels
/// without first entering another geometry voxel.
inline bool visible_from_any(const SceneModel& scene, const std::vector<VoxelKey>& voxels,
                             const std::vector<Vec3>& observers) {
  const auto& b = scene.bounds();
  for (const auto& target : voxels) {
    const Vec3 c = b.center_of(target);
    for (const auto& o : observers) {
      const Vec3 d = c - o;
      const double len = d.norm();
      if (len == 0.0) return true;
      bool reached = false;
      traverse_ray(b, o, d / len, len + b.resolution(), [&](const VoxelKey& k, double, double) {
        if (!scene.occupied(k)) return true;
        reached = std::find(voxels.begin(), voxels.end(), k) != voxels.end();
        return false;
      });
      if (reached) return true;
    }
  }
  return false;
}

inline std::vector<Vec3> observer_positions(const RoiBounds& bounds, const TreeParams& p) {
  std::vector<Vec3> out;
  for (const auto& vp : baseline_grid(bounds, p.observer_camera, p.observer_stand_off, p.observer_overlap,
                                      p.view_direction)) {
    out.push_back(vp.pose.position);
  }
  return out;
}

namespace detail {

struct Branch {
  Vec3 a;
  Vec3 b;
  double ra;
  double rb;
  int level;
  bool leaf = true;
};

inline double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b, double& t) {
  const Vec3 ab = b - a;
  const double l2 = ab.squaredNorm();
  t = l2 > 0.0 ? std::clamp((p - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

inline Vec3 branch_direction(const Vec3& parent_dir, int level, int index, int siblings, const TreeParams& p,
                             Rng& rng) {
  Vec3 d;
  if (level == 1) {
    const double az = 2.0 * std::numbers::pi * (index + uniform(rng, -0.3, 0.3)) / siblings + uniform(rng, 0.0, 0.4);
    const double el = deg2rad(uniform(rng, 15.0, 45.0));
    d = Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  } else {
    const Vec3 helper = std::abs(parent_dir.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    const Vec3 e1 = parent_dir.cross(helper).normalized();
    const Vec3 e2 = parent_dir.cross(e1);
    const double tilt = deg2rad(uniform(rng, 25.0, 60.0));
    const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    d = std::cos(tilt) * parent_dir + std::sin(tilt) * (std::cos(phi) * e1 + std::sin(phi) * e2);
    d.z() += 0.25;
  }
  const Vec3 view = p.view_direction.normalized();
  d -= (1.0 - p.depth_scale) * d.dot(view) * view;
  if (d.norm() < 1e-6) d = Vec3::UnitZ();
  return d.normalized();
}

inline void grow_branches(std::vector<Branch>& out, std::size_t parent, int level, int max_level, const TreeParams& p,
                          Rng& rng) {
  if (level > max_level) return;
  const int n = level == 1 ? uniform_int(rng, p.scaffold_min, p.scaffold_max)
                           : uniform_int(rng, p.children_min, p.children_max);
  if (n <= 0) return;
  out[parent].leaf = false;
  for (int i = 0; i < n; ++i) {
    const Branch par = out[parent];
    const double s = level == 1 ? uniform(rng, 0.35, 0.95) : uniform(rng, 0.3, 1.0);
    const Vec3 start = par.a + s * (par.b - par.a);
    const Vec3 pdir = (par.b - par.a).normalized();
    const Vec3 dir = branch_direction(pdir, level, i, n, p, rng);
    const double len = level == 1 ? p.scaffold_length * uniform(rng, 0.8, 1.2)
                                  : (par.b - par.a).norm() * p.length_decay * uniform(rng, 0.8, 1.2);
    const double r0 = std::max(p.min_radius, (par.ra + s * (par.rb - par.ra)) * p.radius_decay);
    Vec3 end = start + len * dir;
    end.z() = std::max(end.z(), p.base.z());
    out.push_back(Branch{start, end, r0, std::max(p.min_radius, r0 * 0.6), level});
    grow_branches(out, out.size() - 1, level + 1, max_level, p, rng);
  }
}

}  // namespace detail

/// Builds a deterministic symptomatic tree for `seed`.
///
/// The ROI is fitted to the generated geometry with a one-voxel margin. Symptoms are
/// 1 to symptom_voxels_max contiguous geometry voxels: crooks near shoot tips, cankers on
/// trunk and scaffold wood. With require_occluded the first symptom placed is hidden from
/// every midplane observer position.
inline SceneModel generate_scene(std::uint64_t seed, const TreeParams& p) {
  if (!(p.resolution > 0.0)) throw GenerationError("resolution must be positive");
  if (p.levels_min < 1 || p.levels_max < p.levels_min) throw GenerationError("invalid branching levels");
  if (p.crooks_min < 0 || p.crooks_max < p.crooks_min || p.cankers_min < 0 || p.cankers_max < p.cankers_min) {
    throw GenerationError("invalid symptom count range");
  }
  if (p.symptom_voxels_max < 1) throw GenerationError("symptom size must be at least one voxel");
  Rng rng(mix_seeds({seed, 0x7472656555ULL}));

  std::vector<detail::Branch> branches;
  branches.push_back({p.base, p.base + Vec3(0, 0, p.trunk_height), p.trunk_radius, p.trunk_radius * 0.5, 0});
  const int levels = uniform_int(rng, p.levels_min, p.levels_max);
  detail::grow_branches(branches, 0, 1, levels, p, rng);

  const double res = p.resolution;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& br : branches) {
    const double r = std::max(br.ra, br.rb);
    lo = lo.cwiseMin(br.a.cwiseMin(br.b) - Vec3::Constant(r));
    hi = hi.cwiseMax(br.a.cwiseMax(br.b) + Vec3::Constant(r));
  }
  lo -= Vec3::Constant(res);
  hi += Vec3::Constant(res);
  // Snap to the resolution lattice so scenes at the same seed share an exact grid.
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::floor(lo[a] / res) * res;
    hi[a] = std::ceil(hi[a] / res) * res;
  }
  const RoiBounds bounds(lo, hi, res);

  // Voxelize capsules; remember which voxels are woody (trunk/scaffold) or near a shoot tip.
  const std::size_t n_cells = bounds.voxel_count();
  std::vector<std::uint8_t> solid(n_cells, 0), woody(n_cells, 0), tip(n_cells, 0);
  for (const auto& br : branches) {
    const double r = std::max(br.ra, br.rb) + 0.5 * res;
    const Vec3 blo = br.a.cwiseMin(br.b) - Vec3::Constant(r);
    const Vec3 bhi = br.a.cwiseMax(br.b) + Vec3::Constant(r);
    VoxelKey k0, k1;
    for (int a = 0; a < 3; ++a) {
      k0[a] = std::clamp(static_cast<int>(std::floor((blo[a] - lo[a]) / res)), 0, bounds.dims()[a] - 1);
      k1[a] = std::clamp(static_cast<int>(std::floor((bhi[a] - lo[a]) / res)), 0, bounds.dims()[a] - 1);
    }
    for (int x = k0.ix; x <= k1.ix; ++x) {
      for (int y = k0.iy; y <= k1.iy; ++y) {
        for (int z = k0.iz; z <= k1.iz; ++z) {
          const VoxelKey k{x, y, z};
          double t = 0.0;
          const double dist = detail::segment_distance(bounds.center_of(k), br.a, br.b, t);
          const double radius = br.ra + t * (br.rb - br.ra);
          if (dist > radius + 0.5 * res) continue;
          const std::size_t idx = bounds.index_of(k);
          solid[idx] = 1;
          if (br.level <= 1) woody[idx] = 1;
          if (br.leaf && br.level >= 1 && t >= 0.6) tip[idx] = 1;
        }
      }
    }
  }

  std::vector<VoxelKey> geometry;
  for (std::size_t i = 0; i < n_cells; ++i) {
    if (solid[i]) geometry.push_back(bounds.key_at(i));
  }
  auto is_solid = [&](const VoxelKey& k) { return bounds.contains(k) && solid[bounds.index_of(k)]; };
  auto is_surface = [&](const VoxelKey& k) {
    for (const auto& off : kFaceNeighbors) {
      if (!is_solid(k + off)) return true;
    }
    return false;
  };

  std::vector<VoxelKey> crook_pool, canker_pool;
  for (const auto& k : geometry) {
    const std::size_t idx = bounds.index_of(k);
    if (!is_surface(k)) continue;
    if (tip[idx]) crook_pool.push_back(k);
    if (woody[idx]) canker_pool.push_back(k);
  }

  std::vector<std::uint8_t> taken(n_cells, 0);
  std::vector<SymptomInstance> symptoms;

  auto grow = [&](const VoxelKey& anchor) {
    std::vector<VoxelKey> members{anchor};
    const int target = uniform_int(rng, 1, p.symptom_voxels_max);
    std::vector<VoxelKey> frontier;
    auto push_neighbors = [&](const VoxelKey& k) {
      for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dz = -1; dz <= 1; ++dz) {
            const VoxelKey n{k.ix + dx, k.iy + dy, k.iz + dz};
            if (!is_solid(n) || taken[bounds.index_of(n)]) continue;
            if (std::find(members.begin(), members.end(), n) != members.end()) continue;
            if (std::find(frontier.begin(), frontier.end(), n) != frontier.end()) continue;
            frontier.push_back(n);
          }
        }
      }
    };
    push_neighbors(anchor);
    while (static_cast<int>(members.size()) < target && !frontier.empty()) {
      const std::size_t pick = uniform_index(rng, frontier.size());
      const VoxelKey n = frontier[pick];
      frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));
      members.push_back(n);
      push_neighbors(n);
    }
    std::sort(members.begin(), members.end());
    return members;
  };

  auto centroid_of = [&](const std::vector<VoxelKey>& ks) {
    Vec3 c = Vec3::Zero();
    for (const auto& k : ks) c += bounds.center_of(k);
    return Vec3(c / static_cast<double>(ks.size()));
  };

  auto separated = [&](const Vec3& c) {
    for (const auto& s : symptoms) {
      if ((s.centroid - c).norm() < p.min_symptom_separation) return false;
    }
    return true;
  };

  auto commit = [&](int cls, std::vector<VoxelKey> members) {
    for (const auto& k : members) taken[bounds.index_of(k)] = 1;
    SymptomInstance s;
    s.class_id = cls;
    s.centroid = centroid_of(members);
    s.voxels = std::move(members);
    symptoms.push_back(std::move(s));
  };

  const int n_crooks = uniform_int(rng, p.crooks_min, p.crooks_max);
  const int n_cankers = uniform_int(rng, p.cankers_min, p.cankers_max);
  int placed_crooks = 0;
  int placed_cankers = 0;

  if (p.require_occluded && n_crooks + n_cankers > 0) {
    const auto observers = observer_positions(bounds, p);
    bool done = false;
    // Try cankers first: wood near the trunk is where the canopy hides things best.
    for (int cls : {kCanker, kShepherdsCrook}) {
      if (done) break;
      if ((cls == kCanker && n_cankers == 0) || (cls == kShepherdsCrook && n_crooks == 0)) continue;
      std::vector<VoxelKey> pool = cls == kCanker ? canker_pool : crook_pool;
      for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[uniform_index(rng, i)]);
      const SceneModel bare(bounds, geometry, {}, seed, p);
      for (const auto& anchor : pool) {
        if (visible_from_any(bare, {anchor}, observers)) continue;
        auto members = grow(anchor);
        if (visible_from_any(bare, members, observers)) continue;
        commit(cls, std::move(members));
        (cls == kCanker ? placed_cankers : placed_crooks)++;
        done = true;
        break;
      }
    }
    if (!done) throw GenerationError("no symptom location is occluded from the midplane observer grid");
  }

  auto place = [&](int cls, int count, std::vector<VoxelKey> pool, int& placed) {
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[uniform_index(rng, i)]);
    for (const auto& anchor : pool) {
      if (placed >= count) break;
      if (taken[bounds.index_of(anchor)] || !separated(bounds.center_of(anchor))) continue;
      auto members = grow(anchor);
      if (!separated(centroid_of(members))) continue;
      commit(cls, std::move(members));
      ++placed;
    }
    if (placed < count) {
      throw GenerationError("could not place " + std::to_string(count) + " symptoms of class " + std::to_string(cls) +
                            " (only " + std::to_string(placed) + " fit)");
    }
  };
  place(kShepherdsCrook, n_crooks, crook_pool, placed_crooks);
  place(kCanker, n_cankers, canker_pool, placed_cankers);

  return SceneModel(bounds, std::move(geometry), std::move(symptoms), seed, p);
}

}  // namespace canopy
