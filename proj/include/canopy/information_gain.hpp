#pragma once

#include <vector>

#include "canopy/camera.hpp"
#include "canopy/errors.hpp"
#include "canopy/ray_traversal.hpp"
#include "canopy/semantic_octree.hpp"

namespace canopy {

/// Per-ray tallies shared by both gain functions.
struct RayTally {
  double unknown = 0.0;   // U_r
  double semantic = 0.0;  // S_r
};

/// Marches one ray until an occupied voxel (included), max range, or the ROI boundary.
/// Unknown voxels add 1 to U_r; occupied voxels add (1 - confidence) to S_r, with
/// unlabeled occupied voxels taking the background confidence.
inline RayTally march_gain_ray(const SemanticOctree& map, const Vec3& origin, const Vec3& dir, double max_range) {
  RayTally tally;
  const RoiBounds& b = map.bounds();
  const double background = map.params().background_confidence;
  traverse_ray(b, origin, dir, max_range, [&](const VoxelKey& k, double, double) {
    const std::size_t idx = b.index_of(k);
    switch (map.state_at(idx)) {
      case Occupancy::Unknown:
        tally.unknown += 1.0;
        return true;
      case Occupancy::Free:
        return true;
      case Occupancy::Occupied: {
        const SemanticVoxel& v = map.voxel_at(idx);
        tally.semantic += 1.0 - (v.has_semantics ? v.confidence : background);
        return false;
      }
    }
    return false;
  });
  return tally;
}

/// Ray fan in the camera frame, reused across candidate evaluations.
class GainRays {
 public:
  explicit GainRays(const CameraModel& camera) : camera_(camera), dirs_(camera_ray_directions(camera)) {}
  const CameraModel& camera() const { return camera_; }
  const std::vector<Vec3>& directions() const { return dirs_; }

 private:
  CameraModel camera_;
  std::vector<Vec3> dirs_;
};

/// Blended gain (1/|R|) * sum_r ((1 - beta) U_r + beta S_r). beta = 0 is the volumetric gain.
inline double blended_gain(const CameraPose& pose, const SemanticOctree& map, const GainRays& rays, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ContractViolation("beta must lie in [0,1]");
  const Eigen::Matrix3d rot = pose.orientation.toRotationMatrix();
  double sum = 0.0;
  for (const Vec3& d : rays.directions()) {
    const RayTally t = march_gain_ray(map, pose.position, rot * d, rays.camera().max_range);
    sum += (1.0 - beta) * t.unknown + beta * t.semantic;
  }
  return sum / static_cast<double>(rays.directions().size());
}

/// Mean count of unknown voxels per ray.
inline double volumetric_gain(const CameraPose& pose, const SemanticOctree& map, const GainRays& rays) {
  return blended_gain(pose, map, rays, 0.0);
}

inline double volumetric_gain(const CameraPose& pose, const SemanticOctree& map, const CameraModel& camera) {
  return volumetric_gain(pose, map, GainRays(camera));
}

/// Volumetric gain blended with per-ray semantic uncertainty of the occupied voxels reached.
inline double semantic_gain(const CameraPose& pose, const SemanticOctree& map, const GainRays& rays, double beta) {
  return blended_gain(pose, map, rays, beta);
}

inline double semantic_gain(const CameraPose& pose, const SemanticOctree& map, const CameraModel& camera, double beta) {
  return semantic_gain(pose, map, GainRays(camera), beta);
}

}  // namespace canopy
