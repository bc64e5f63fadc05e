#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "canopy/random.hpp"
#include "canopy/viewpoints.hpp"
#include "canopy/voxel_grid.hpp"

namespace canopy {

/// Binary voxelization of reachable end-effector positions.
class ReachabilityGrid {
 public:
  explicit ReachabilityGrid(RoiBounds bounds) : bounds_(std::move(bounds)), cells_(bounds_.voxel_count(), 0) {}

  static ReachabilityGrid all(RoiBounds bounds) {
    ReachabilityGrid g(std::move(bounds));
    std::fill(g.cells_.begin(), g.cells_.end(), 1);
    return g;
  }

  const RoiBounds& bounds() const { return bounds_; }

  /// Positions outside the grid extent are unreachable.
  bool reachable(const Vec3& p) const {
    const auto k = bounds_.key_of(p);
    return k && cells_[bounds_.index_of(*k)] != 0;
  }

  void mark(const Vec3& p) {
    if (const auto k = bounds_.key_of(p)) cells_[bounds_.index_of(*k)] = 1;
  }

  std::size_t reachable_count() const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
  }

 private:
  RoiBounds bounds_;
  std::vector<std::uint8_t> cells_;
};

/// Synthetic arm workspace: positions uniform in a spherical shell around the arm mount.
struct SphericalShellSampler {
  Vec3 center = Vec3(0.0, 0.0, 0.9);
  double inner_radius = 0.25;
  double outer_radius = 1.05;

  Vec3 operator()(Rng& rng) const {
    const double r = std::cbrt(uniform(rng, std::pow(inner_radius, 3), std::pow(outer_radius, 3)));
    const double z = uniform(rng, -1.0, 1.0);
    const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return center + r * Vec3(s * std::cos(phi), s * std::sin(phi), z);
  }

  bool contains(const Vec3& p) const {
    const double d = (p - center).norm();
    return d >= inner_radius && d <= outer_radius;
  }

  /// Grid extent enclosing the shell.
  RoiBounds enclosing_bounds(double resolution) const {
    const Vec3 pad = Vec3::Constant(outer_radius + resolution);
    return RoiBounds(center - pad, center + pad, resolution);
  }
};

/// Marks every cell that receives at least one sampled position.
inline ReachabilityGrid build_reachability(const RoiBounds& extent, std::size_t sample_count,
                                           const std::function<Vec3(Rng&)>& sampler, Rng& rng) {
  ReachabilityGrid grid(extent);
  for (std::size_t i = 0; i < sample_count; ++i) grid.mark(sampler(rng));
  return grid;
}

/// Candidates whose position falls in a reachable cell, order preserved.
inline std::vector<Viewpoint> filter_feasible(const std::vector<Viewpoint>& candidates, const ReachabilityGrid& grid) {
  std::vector<Viewpoint> out;
  out.reserve(candidates.size());
  for (const auto& v : candidates) {
    if (grid.reachable(v.pose.position)) out.push_back(v);
  }
  return out;
}

}  // namespace canopy
