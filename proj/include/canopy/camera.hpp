#pragma once

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <vector>

#include "canopy/errors.hpp"
#include "canopy/voxel_grid.hpp"

namespace canopy {

using Quat = Eigen::Quaterniond;

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Angular sampling model of a depth camera: a rows x cols grid of rays spanning the FoV.
struct CameraModel {
  double theta_h = deg2rad(40.0);
  double theta_v = deg2rad(30.0);
  double max_range = 0.9;
  int ray_rows = 72;
  int ray_cols = 96;

  void validate() const {
    if (!(theta_h > 0.0 && theta_h < std::numbers::pi) || !(theta_v > 0.0 && theta_v < std::numbers::pi)) {
      throw ConfigError("camera field of view must lie in (0, pi)");
    }
    if (!(max_range > 0.0)) throw ConfigError("camera max range must be positive");
    if (ray_rows < 2 || ray_cols < 2) throw ConfigError("camera ray grid must be at least 2x2");
  }

  CameraModel with_ray_grid(int rows, int cols) const {
    CameraModel c = *this;
    c.ray_rows = rows;
    c.ray_cols = cols;
    return c;
  }
};

/// Camera frame convention: +x forward, +y left, +z up.
struct CameraPose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  Vec3 forward() const { return orientation * Vec3::UnitX(); }

  /// Pose at `position` whose forward axis is `forward`, keeping the image upright
  /// with respect to world +z where possible.
  static CameraPose facing(const Vec3& position, const Vec3& forward) {
    const double n = forward.norm();
    if (!(n > 0.0)) throw ContractViolation("camera forward axis must be non-zero");
    const Vec3 f = forward / n;
    Vec3 up_hint = Vec3::UnitZ();
    if (std::abs(f.dot(up_hint)) > 0.999) up_hint = Vec3::UnitY();
    const Vec3 left = up_hint.cross(f).normalized();
    const Vec3 up = f.cross(left);
    Eigen::Matrix3d r;
    r.col(0) = f;
    r.col(1) = left;
    r.col(2) = up;
    return CameraPose{position, Quat(r).normalized()};
  }

  static CameraPose look_at(const Vec3& position, const Vec3& target) { return facing(position, target - position); }
};

/// Unit ray directions in the camera frame, row-major (top row first).
inline std::vector<Vec3> camera_ray_directions(const CameraModel& cam) {
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(cam.ray_rows) * static_cast<std::size_t>(cam.ray_cols));
  const double th = std::tan(cam.theta_h / 2.0);
  const double tv = std::tan(cam.theta_v / 2.0);
  for (int r = 0; r < cam.ray_rows; ++r) {
    const double v = (1.0 - 2.0 * (r + 0.5) / cam.ray_rows) * tv;
    for (int c = 0; c < cam.ray_cols; ++c) {
      const double u = (1.0 - 2.0 * (c + 0.5) / cam.ray_cols) * th;
      dirs.emplace_back(Vec3(1.0, u, v).normalized());
    }
  }
  return dirs;
}

}  // namespace canopy
