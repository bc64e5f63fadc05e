#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "canopy/errors.hpp"

namespace canopy {

using Vec3 = Eigen::Vector3d;

struct VoxelKey {
  int ix = 0;
  int iy = 0;
  int iz = 0;

  friend constexpr auto operator<=>(const VoxelKey&, const VoxelKey&) = default;

  constexpr int operator[](int axis) const { return axis == 0 ? ix : (axis == 1 ? iy : iz); }
  constexpr int& operator[](int axis) { return axis == 0 ? ix : (axis == 1 ? iy : iz); }
};

inline std::string to_string(const VoxelKey& k) {
  return "(" + std::to_string(k.ix) + "," + std::to_string(k.iy) + "," + std::to_string(k.iz) + ")";
}

/// Axis-aligned region of interest discretized at a fixed resolution.
///
/// The voxel grid starts at min_corner and spans ceil((max - min) / resolution)
/// cells per axis, so the grid box may overhang max_corner by less than one cell.
/// All traversal and membership tests use the grid box.
class RoiBounds {
 public:
  RoiBounds(const Vec3& min_corner, const Vec3& max_corner, double resolution)
      : min_(min_corner), max_(max_corner), resolution_(resolution) {
    if (!(resolution > 0.0) || !std::isfinite(resolution)) {
      throw ConfigError("ROI resolution must be positive");
    }
    for (int a = 0; a < 3; ++a) {
      if (!std::isfinite(min_[a]) || !std::isfinite(max_[a]) || !(max_[a] > min_[a])) {
        throw ConfigError("ROI max corner must exceed min corner on every axis");
      }
      // Small slack so extents that are exact multiples of the resolution do not
      // gain a spurious extra cell from rounding.
      const double cells = (max_[a] - min_[a]) / resolution_;
      dims_[a] = static_cast<int>(std::ceil(cells - 1e-9));
      if (dims_[a] < 1) dims_[a] = 1;
    }
    grid_max_ = min_ + resolution_ * Vec3(dims_[0], dims_[1], dims_[2]);
  }

  const Vec3& min_corner() const { return min_; }
  const Vec3& max_corner() const { return max_; }
  /// Upper corner of the voxel grid box (>= max_corner).
  const Vec3& grid_max() const { return grid_max_; }
  double resolution() const { return resolution_; }
  const std::array<int, 3>& dims() const { return dims_; }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) *
           static_cast<std::size_t>(dims_[2]);
  }
  Vec3 center() const { return 0.5 * (min_ + grid_max_); }

  bool contains(const VoxelKey& k) const {
    return k.ix >= 0 && k.iy >= 0 && k.iz >= 0 && k.ix < dims_[0] && k.iy < dims_[1] && k.iz < dims_[2];
  }

  bool contains(const Vec3& p) const {
    for (int a = 0; a < 3; ++a) {
      if (!(p[a] >= min_[a] && p[a] < grid_max_[a])) return false;
    }
    return true;
  }

  /// Key of the voxel containing p, or nullopt outside the grid box.
  std::optional<VoxelKey> key_of(const Vec3& p) const {
    if (!contains(p)) return std::nullopt;
    VoxelKey k;
    for (int a = 0; a < 3; ++a) {
      int i = static_cast<int>(std::floor((p[a] - min_[a]) / resolution_));
      k[a] = i < 0 ? 0 : (i >= dims_[a] ? dims_[a] - 1 : i);
    }
    return k;
  }

  Vec3 center_of(const VoxelKey& k) const {
    return min_ + resolution_ * Vec3(k.ix + 0.5, k.iy + 0.5, k.iz + 0.5);
  }

  std::size_t index_of(const VoxelKey& k) const {
    return (static_cast<std::size_t>(k.iz) * static_cast<std::size_t>(dims_[1]) + static_cast<std::size_t>(k.iy)) *
               static_cast<std::size_t>(dims_[0]) +
           static_cast<std::size_t>(k.ix);
  }

  VoxelKey key_at(std::size_t index) const {
    const auto nx = static_cast<std::size_t>(dims_[0]);
    const auto ny = static_cast<std::size_t>(dims_[1]);
    VoxelKey k;
    k.ix = static_cast<int>(index % nx);
    k.iy = static_cast<int>((index / nx) % ny);
    k.iz = static_cast<int>(index / (nx * ny));
    return k;
  }

  bool operator==(const RoiBounds& o) const {
    return min_ == o.min_ && max_ == o.max_ && resolution_ == o.resolution_;
  }

 private:
  Vec3 min_;
  Vec3 max_;
  double resolution_;
  std::array<int, 3> dims_{};
  Vec3 grid_max_;
};

inline constexpr std::array<VoxelKey, 6> kFaceNeighbors{{
    {-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};

inline VoxelKey operator+(const VoxelKey& a, const VoxelKey& b) { return {a.ix + b.ix, a.iy + b.iy, a.iz + b.iz}; }

}  // namespace canopy
