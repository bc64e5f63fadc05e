#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "canopy/voxel_grid.hpp"

namespace canopy {

/// Clips the ray segment {origin + t * dir : t in [t_min, t_max]} against the grid box.
/// Returns false when the segment misses the box or overlaps it with zero length.
inline bool clip_to_box(const RoiBounds& grid, const Vec3& origin, const Vec3& dir, double& t_min, double& t_max) {
  for (int a = 0; a < 3; ++a) {
    const double lo = grid.min_corner()[a];
    const double hi = grid.grid_max()[a];
    if (dir[a] == 0.0) {
      if (origin[a] < lo || origin[a] >= hi) return false;
      continue;
    }
    double ta = (lo - origin[a]) / dir[a];
    double tb = (hi - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t_min = std::max(t_min, ta);
    t_max = std::min(t_max, tb);
  }
  return t_min < t_max;
}

/// Exact grid traversal (Amanatides & Woo) of the segment origin + t * dir, t in [0, length],
/// restricted to the grid box. `dir` must be unit length so t is a distance in metres.
///
/// Calls visit(key, t_enter, t_exit) once per voxel in ray order; returning false stops
/// the walk. Returns the number of voxels visited.
template <class Visitor>
std::size_t traverse_ray(const RoiBounds& grid, const Vec3& origin, const Vec3& dir, double length, Visitor&& visit) {
  double t0 = 0.0;
  double t1 = length;
  if (!(length > 0.0) || !clip_to_box(grid, origin, dir, t0, t1)) return 0;

  const double res = grid.resolution();
  const Vec3& lo = grid.min_corner();
  const auto& dims = grid.dims();

  const Vec3 entry = origin + t0 * dir;
  VoxelKey key;
  int step[3];
  for (int a = 0; a < 3; ++a) {
    int i = static_cast<int>(std::floor((entry[a] - lo[a]) / res));
    key[a] = std::clamp(i, 0, dims[a] - 1);
    step[a] = dir[a] > 0.0 ? 1 : (dir[a] < 0.0 ? -1 : 0);
  }

  // Parametric distance to the next grid plane on each axis, recomputed from the
  // origin on every step so no error accumulates along long rays.
  auto next_crossing = [&](int a) {
    if (step[a] == 0) return std::numeric_limits<double>::infinity();
    const double plane = lo[a] + (key[a] + (step[a] > 0 ? 1 : 0)) * res;
    return (plane - origin[a]) / dir[a];
  };

  double t_cur = t0;
  std::size_t visited = 0;
  for (;;) {
    const double tx = next_crossing(0);
    const double ty = next_crossing(1);
    const double tz = next_crossing(2);
    int axis = 0;
    double t_next = tx;
    if (ty < t_next) {
      axis = 1;
      t_next = ty;
    }
    if (tz < t_next) {
      axis = 2;
      t_next = tz;
    }
    // Zero-length visits happen when the ray passes exactly through an edge or corner, or
    // leaves a start point lying on a face. The voxel holding the start point is always
    // reported; other zero-length ones are not entered by the segment and are skipped.
    if (t_next > t_cur || visited == 0) {
      ++visited;
      if (!visit(static_cast<const VoxelKey&>(key), t_cur, std::min(t_next, t1))) break;
    }
    if (t_next >= t1) break;
    key[axis] += step[axis];
    if (key[axis] < 0 || key[axis] >= dims[axis]) break;
    t_cur = t_next;
  }
  return visited;
}

}  // namespace canopy
