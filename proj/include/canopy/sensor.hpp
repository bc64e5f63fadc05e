#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "canopy/camera.hpp"
#include "canopy/random.hpp"
#include "canopy/ray_traversal.hpp"
#include "canopy/scene.hpp"
#include "canopy/semantic_octree.hpp"

namespace canopy {

/// Parametric stand-in for an instance segmentation network.
struct DetectorModel {
  double p_detect = 0.8;
  double conf_mean = 0.75;
  double conf_spread = 0.15;
  double p_misclass = 0.05;
  double p_false_positive = 0.1;
  double background_confidence = 0.3;
  std::uint64_t noise_seed = 0;

  void validate() const {
    auto prob = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1]");
    };
    prob(p_detect, "p_detect");
    prob(p_misclass, "p_misclass");
    prob(p_false_positive, "p_false_positive");
    prob(background_confidence, "background_confidence");
    prob(conf_mean, "conf_mean");
    if (!(conf_spread >= 0.0)) throw ConfigError("conf_spread must be >= 0");
  }

  double sample_confidence(Rng& rng) const {
    return std::clamp(uniform(rng, conf_mean - conf_spread, conf_mean + conf_spread), 0.0, 1.0);
  }
};

struct RenderedView {
  std::vector<SemanticPoint> points;
  /// Symptom indices hit by at least one ray, ascending.
  std::vector<int> visible_symptoms;
  /// Subset of visible_symptoms the detector fired on.
  std::vector<int> detected_symptoms;
};

/// Renders one semantic point cloud from `pose`.
///
/// Rays that hit geometry produce a point just inside the hit voxel; rays that reach
/// max range or leave the scene produce max-range background points. Each visible
/// symptom is detected independently; detected instances and optional false-positive
/// patches are rasterized in ascending confidence so higher confidence wins overlaps.
inline RenderedView render_view_detailed(const SceneModel& scene, const CameraPose& pose, const CameraModel& camera,
                                         const DetectorModel& detector, Rng& rng) {
  const auto& bounds = scene.bounds();
  const auto dirs = camera_ray_directions(camera);
  const Eigen::Matrix3d rot = pose.orientation.toRotationMatrix();
  const double nudge = 1e-3 * bounds.resolution();
  const double graze = 1e-6 * bounds.resolution();

  RenderedView out;
  out.points.reserve(dirs.size());
  std::vector<int> hit_cell(dirs.size(), -2);  // -2 miss, -1 plain geometry, >= 0 symptom index
  std::vector<VoxelKey> hit_key(dirs.size());

  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const Vec3 d = rot * dirs[i];
    SemanticPoint pt;
    pt.class_id = kBackgroundClass;
    pt.confidence = detector.background_confidence;
    bool hit = false;
    traverse_ray(bounds, pose.position, d, camera.max_range, [&](const VoxelKey& k, double t_in, double t_out) {
      const int cell = scene.cell_at(bounds.index_of(k));
      if (cell == SceneModel::kEmpty) return true;
      // Edge grazes: the chord is rounding noise, the ray passes by.
      if (t_out - t_in < graze) return true;
      hit = true;
      pt.position = pose.position + (t_in + std::min(nudge, 0.5 * (t_out - t_in))) * d;
      hit_cell[i] = cell - 1;
      hit_key[i] = k;
      return false;
    });
    if (!hit) {
      pt.position = pose.position + camera.max_range * d;
      pt.is_max_range = true;
    }
    out.points.push_back(pt);
  }

  std::vector<std::vector<std::size_t>> symptom_points(scene.symptoms().size());
  std::vector<std::size_t> plain_hits;
  for (std::size_t i = 0; i < hit_cell.size(); ++i) {
    if (hit_cell[i] >= 0) symptom_points[static_cast<std::size_t>(hit_cell[i])].push_back(i);
    if (hit_cell[i] == -1) plain_hits.push_back(i);
  }

  struct Mask {
    double confidence;
    int class_id;
    std::vector<std::size_t> points;
  };
  std::vector<Mask> masks;
  for (std::size_t s = 0; s < symptom_points.size(); ++s) {
    if (symptom_points[s].empty()) continue;
    out.visible_symptoms.push_back(static_cast<int>(s));
    if (!bernoulli(rng, detector.p_detect)) continue;
    out.detected_symptoms.push_back(static_cast<int>(s));
    int cls = scene.symptoms()[s].class_id;
    if (bernoulli(rng, detector.p_misclass)) cls = cls == kShepherdsCrook ? kCanker : kShepherdsCrook;
    masks.push_back(Mask{detector.sample_confidence(rng), cls, symptom_points[s]});
  }
  if (!plain_hits.empty() && bernoulli(rng, detector.p_false_positive)) {
    const VoxelKey seed_key = hit_key[plain_hits[uniform_index(rng, plain_hits.size())]];
    Mask fp{0.0, uniform_int(rng, kShepherdsCrook, kCanker), {}};
    fp.confidence = detector.sample_confidence(rng);
    for (std::size_t i : plain_hits) {
      const VoxelKey& k = hit_key[i];
      if (std::abs(k.ix - seed_key.ix) <= 1 && std::abs(k.iy - seed_key.iy) <= 1 && std::abs(k.iz - seed_key.iz) <= 1) {
        fp.points.push_back(i);
      }
    }
    masks.push_back(std::move(fp));
  }

  std::stable_sort(masks.begin(), masks.end(), [](const Mask& a, const Mask& b) { return a.confidence < b.confidence; });
  for (const auto& m : masks) {
    for (std::size_t i : m.points) {
      out.points[i].class_id = m.class_id;
      out.points[i].confidence = m.confidence;
    }
  }
  return out;
}

inline std::vector<SemanticPoint> render_view(const SceneModel& scene, const CameraPose& pose,
                                              const CameraModel& camera, const DetectorModel& detector, Rng& rng) {
  return render_view_detailed(scene, pose, camera, detector, rng).points;
}

}  // namespace canopy
