#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>
#include <vector>

#include "canopy/camera.hpp"
#include "canopy/errors.hpp"
#include "canopy/random.hpp"
#include "canopy/voxel_grid.hpp"

namespace canopy {

enum class ViewpointSource : std::uint8_t { Grid, GridPerturbed, FrontierCluster, SemanticCluster };

inline std::string_view to_string(ViewpointSource s) {
  switch (s) {
    case ViewpointSource::Grid: return "grid";
    case ViewpointSource::GridPerturbed: return "grid_perturbed";
    case ViewpointSource::FrontierCluster: return "frontier_cluster";
    case ViewpointSource::SemanticCluster: return "semantic_cluster";
  }
  return "unknown";
}

/// Candidate camera pose with its scoring bookkeeping; utility = gain - alpha * cost once scored.
struct Viewpoint {
  CameraPose pose;
  ViewpointSource source = ViewpointSource::Grid;
  double gain = 0.0;
  double cost = 0.0;
  double utility = 0.0;
};

/// Planar footprint of one view at stand-off d and the grid spacing for overlap rho.
struct Footprint {
  double width = 0.0;
  double height = 0.0;
  double spacing_u = 0.0;
  double spacing_v = 0.0;
};

inline Footprint midplane_footprint(const CameraModel& camera, double stand_off, double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("overlap must lie in [0, 1)");
  if (!(stand_off > 0.0)) throw ConfigError("stand-off distance must be positive");
  Footprint f;
  f.width = 2.0 * stand_off * std::tan(camera.theta_h / 2.0);
  f.height = 2.0 * stand_off * std::tan(camera.theta_v / 2.0);
  f.spacing_u = f.width * (1.0 - overlap);
  f.spacing_v = f.height * (1.0 - overlap);
  return f;
}

/// In-plane axes for a view direction: u horizontal, v as close to world up as possible.
struct MidplaneFrame {
  Vec3 center;
  Vec3 forward;
  Vec3 u;
  Vec3 v;
  double u_min, u_max, v_min, v_max;  // ROI extent projected onto the plane, relative to center
};

inline MidplaneFrame midplane_frame(const RoiBounds& roi, const Vec3& view_direction) {
  const double n = view_direction.norm();
  if (!(n > 0.0)) throw ContractViolation("view direction must be non-zero");
  MidplaneFrame m;
  m.forward = view_direction / n;
  Vec3 up_hint = Vec3::UnitZ();
  if (std::abs(m.forward.dot(up_hint)) > 0.999) up_hint = Vec3::UnitY();
  m.u = up_hint.cross(m.forward).normalized();
  m.v = m.forward.cross(m.u);
  const Vec3& lo = roi.min_corner();
  const Vec3& hi = roi.max_corner();
  m.center = 0.5 * (lo + hi);
  m.u_min = m.v_min = std::numeric_limits<double>::infinity();
  m.u_max = m.v_max = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner((c & 1) ? hi.x() : lo.x(), (c & 2) ? hi.y() : lo.y(), (c & 4) ? hi.z() : lo.z());
    const Vec3 rel = corner - m.center;
    m.u_min = std::min(m.u_min, rel.dot(m.u));
    m.u_max = std::max(m.u_max, rel.dot(m.u));
    m.v_min = std::min(m.v_min, rel.dot(m.v));
    m.v_max = std::max(m.v_max, rel.dot(m.v));
  }
  return m;
}

/// Number of tiles of pitch `spacing` needed to span `extent`.
inline int tile_count(double extent, double spacing) {
  return std::max(1, static_cast<int>(std::ceil(extent / spacing - 1e-9)));
}

/// Boustrophedon grid of views tiling the ROI midplane.
///
/// Tile centres are spaced by the overlap-reduced pitch and centred on the plane, so
/// ceil(extent / pitch) tiles of full footprint width always cover the extent. Rows run
/// bottom to top; even rows go in +u, odd rows in -u.
inline std::vector<Viewpoint> baseline_grid(const RoiBounds& roi, const CameraModel& camera, double stand_off,
                                            double overlap, const Vec3& view_direction) {
  const Footprint fp = midplane_footprint(camera, stand_off, overlap);
  const MidplaneFrame m = midplane_frame(roi, view_direction);
  const int cols = tile_count(m.u_max - m.u_min, fp.spacing_u);
  const int rows = tile_count(m.v_max - m.v_min, fp.spacing_v);
  const double u_mid = 0.5 * (m.u_min + m.u_max);
  const double v_mid = 0.5 * (m.v_min + m.v_max);

  std::vector<Viewpoint> out;
  out.reserve(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r) {
    const double v = v_mid + (r - (rows - 1) / 2.0) * fp.spacing_v;
    for (int i = 0; i < cols; ++i) {
      const int c = (r % 2 == 0) ? i : cols - 1 - i;
      const double u = u_mid + (c - (cols - 1) / 2.0) * fp.spacing_u;
      const Vec3 on_plane = m.center + u * m.u + v * m.v;
      Viewpoint vp;
      vp.pose = CameraPose::facing(on_plane - stand_off * m.forward, m.forward);
      vp.source = ViewpointSource::Grid;
      out.push_back(vp);
    }
  }
  return out;
}

/// Unit vector drawn uniformly from the spherical cap of half-angle `half_angle` around `axis`.
inline Vec3 sample_cap_direction(const Vec3& axis, double half_angle, Rng& rng) {
  const double cos_t = uniform(rng, std::cos(half_angle), 1.0);
  const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
  const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const Vec3 a = axis.normalized();
  const Vec3 helper = std::abs(a.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 e1 = a.cross(helper).normalized();
  const Vec3 e2 = a.cross(e1);
  return (cos_t * a + sin_t * (std::cos(phi) * e1 + std::sin(phi) * e2)).normalized();
}

/// Each base view followed by `per_view` copies with forward axes jittered inside a cap.
inline std::vector<Viewpoint> perturbed_grid(const std::vector<Viewpoint>& base, double cone_half_angle, int per_view,
                                             Rng& rng) {
  if (per_view <= 0) return base;
  if (!(cone_half_angle > 0.0 && cone_half_angle < std::numbers::pi / 2.0)) {
    throw ContractViolation("cone half-angle must lie in (0, pi/2)");
  }
  std::vector<Viewpoint> out;
  out.reserve(base.size() * static_cast<std::size_t>(per_view + 1));
  for (const auto& vp : base) {
    out.push_back(vp);
    for (int i = 0; i < per_view; ++i) {
      Viewpoint p = vp;
      p.pose = CameraPose::facing(vp.pose.position, sample_cap_direction(vp.pose.forward(), cone_half_angle, rng));
      p.source = ViewpointSource::GridPerturbed;
      out.push_back(p);
    }
  }
  return out;
}

/// Views uniform in the half-shell {min_r <= |p - centroid| <= max_r, (p - centroid) . facing >= 0},
/// each looking at the centroid.
inline std::vector<Viewpoint> hemisphere_sample(const Vec3& centroid, const Vec3& facing, double min_r, double max_r,
                                                int n, Rng& rng, ViewpointSource source = ViewpointSource::FrontierCluster) {
  if (!(min_r > 0.0 && min_r <= max_r)) throw ContractViolation("radial range must satisfy 0 < min <= max");
  const Vec3 axis = facing.normalized();
  std::vector<Viewpoint> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  const double lo3 = min_r * min_r * min_r;
  const double hi3 = max_r * max_r * max_r;
  for (int i = 0; i < n; ++i) {
    const double r = std::cbrt(uniform(rng, lo3, hi3));
    // Uniform direction on the sphere, reflected into the facing half-space.
    const double z = uniform(rng, -1.0, 1.0);
    const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    Vec3 d(s * std::cos(phi), s * std::sin(phi), z);
    if (d.dot(axis) < 0.0) d -= 2.0 * d.dot(axis) * axis;
    Viewpoint vp;
    vp.pose = CameraPose::look_at(centroid + r * d, centroid);
    vp.source = source;
    out.push_back(vp);
  }
  return out;
}

}  // namespace canopy
