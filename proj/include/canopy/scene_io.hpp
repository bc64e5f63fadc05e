#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "canopy/errors.hpp"
#include "canopy/scene.hpp"

namespace canopy {

inline constexpr int kSceneFormatVersion = 1;

namespace detail {

inline nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }
inline nlohmann::json key_json(const VoxelKey& k) { return nlohmann::json::array({k.ix, k.iy, k.iz}); }

inline Vec3 json_vec(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline VoxelKey json_key(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a voxel key [ix, iy, iz]");
  return VoxelKey{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

// One table drives both directions so export and import cannot drift apart.
template <typename Visit>
void visit_tree_params(TreeParams& p, Visit&& v) {
  v("resolution", p.resolution);
  v("base", p.base);
  v("trunk_height", p.trunk_height);
  v("trunk_radius", p.trunk_radius);
  v("levels_min", p.levels_min);
  v("levels_max", p.levels_max);
  v("scaffold_min", p.scaffold_min);
  v("scaffold_max", p.scaffold_max);
  v("children_min", p.children_min);
  v("children_max", p.children_max);
  v("scaffold_length", p.scaffold_length);
  v("length_decay", p.length_decay);
  v("radius_decay", p.radius_decay);
  v("min_radius", p.min_radius);
  v("depth_scale", p.depth_scale);
  v("crooks_min", p.crooks_min);
  v("crooks_max", p.crooks_max);
  v("cankers_min", p.cankers_min);
  v("cankers_max", p.cankers_max);
  v("symptom_voxels_max", p.symptom_voxels_max);
  v("min_symptom_separation", p.min_symptom_separation);
  v("require_occluded", p.require_occluded);
  v("observer_fov_h", p.observer_camera.theta_h);
  v("observer_fov_v", p.observer_camera.theta_v);
  v("observer_max_range", p.observer_camera.max_range);
  v("observer_stand_off", p.observer_stand_off);
  v("observer_overlap", p.observer_overlap);
  v("view_direction", p.view_direction);
}

}  // namespace detail

inline nlohmann::json tree_params_json(TreeParams p) {
  nlohmann::json j;
  j["preset"] = to_string(p.preset);
  detail::visit_tree_params(p, [&j](const char* name, auto& field) {
    if constexpr (std::is_same_v<std::remove_cvref_t<decltype(field)>, Vec3>) {
      j[name] = detail::vec_json(field);
    } else {
      j[name] = field;
    }
  });
  return j;
}

inline TreeParams tree_params_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("scene params must be an object");
  TreeParams p = TreeParams::for_preset(parse_preset(j.value("preset", std::string("orchard"))));
  std::size_t seen = j.contains("preset") ? 1 : 0;
  detail::visit_tree_params(p, [&](const char* name, auto& field) {
    if (!j.contains(name)) return;
    ++seen;
    if constexpr (std::is_same_v<std::remove_cvref_t<decltype(field)>, Vec3>) {
      field = detail::json_vec(j.at(name));
    } else {
      field = j.at(name).template get<std::remove_cvref_t<decltype(field)>>();
    }
  });
  if (seen != j.size()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool known = it.key() == "preset";
      detail::visit_tree_params(p, [&](const char* name, auto&) { known = known || it.key() == name; });
      if (!known) throw FormatError("unknown scene parameter '" + it.key() + "'");
    }
  }
  return p;
}

/// Scene fixture: seed, generator parameters, bounds, geometry voxels and symptom records.
inline nlohmann::json scene_to_json(const SceneModel& scene) {
  nlohmann::json j;
  j["format"] = "canopy-scene";
  j["version"] = kSceneFormatVersion;
  j["seed"] = scene.seed();
  j["params"] = tree_params_json(scene.params());
  const RoiBounds& b = scene.bounds();
  j["bounds"] = {{"min", detail::vec_json(b.min_corner())},
                 {"max", detail::vec_json(b.max_corner())},
                 {"resolution", b.resolution()}};
  auto geometry = nlohmann::json::array();
  for (const auto& k : scene.geometry()) geometry.push_back(detail::key_json(k));
  j["geometry"] = std::move(geometry);
  auto symptoms = nlohmann::json::array();
  for (const auto& s : scene.symptoms()) {
    auto voxels = nlohmann::json::array();
    for (const auto& k : s.voxels) voxels.push_back(detail::key_json(k));
    symptoms.push_back({{"class_id", s.class_id}, {"centroid", detail::vec_json(s.centroid)}, {"voxels", voxels}});
  }
  j["symptoms"] = std::move(symptoms);
  return j;
}

inline SceneModel scene_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != "canopy-scene") throw FormatError("not a canopy scene file");
    if (j.at("version").get<int>() != kSceneFormatVersion) throw FormatError("unsupported scene file version");
    const auto& jb = j.at("bounds");
    RoiBounds bounds(detail::json_vec(jb.at("min")), detail::json_vec(jb.at("max")), jb.at("resolution").get<double>());
    std::vector<VoxelKey> geometry;
    for (const auto& k : j.at("geometry")) geometry.push_back(detail::json_key(k));
    std::vector<SymptomInstance> symptoms;
    for (const auto& js : j.at("symptoms")) {
      SymptomInstance s;
      s.class_id = js.at("class_id").get<int>();
      for (const auto& k : js.at("voxels")) s.voxels.push_back(detail::json_key(k));
      symptoms.push_back(std::move(s));
    }
    return SceneModel(std::move(bounds), std::move(geometry), std::move(symptoms), j.at("seed").get<std::uint64_t>(),
                      tree_params_from_json(j.at("params")));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed scene file: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed scene file: ") + e.what());
  }
}

/// Evaluation input: one record per symptom with its class, centroid and the matching radius.
inline nlohmann::json ground_truth_json(const SceneModel& scene, double matching_radius) {
  auto out = nlohmann::json::array();
  for (const auto& s : scene.symptoms()) {
    out.push_back({{"class_id", s.class_id}, {"centroid", detail::vec_json(s.centroid)}, {"radius", matching_radius}});
  }
  return out;
}

inline void save_scene(const SceneModel& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write scene file " + path);
  out << scene_to_json(scene).dump(1) << '\n';
  if (!out) throw FormatError("failed writing scene file " + path);
}

inline SceneModel load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open scene file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("scene file is not valid JSON: ") + e.what());
  }
  return scene_from_json(j);
}

}  // namespace canopy
