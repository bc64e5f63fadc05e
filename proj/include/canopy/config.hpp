#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>

#include <json.hpp>

#include "canopy/camera.hpp"
#include "canopy/episode.hpp"
#include "canopy/errors.hpp"
#include "canopy/reachability.hpp"
#include "canopy/semantic_octree.hpp"

namespace canopy {

/// Every tunable of an episode in one place. Loaded from a flat JSON object whose keys
/// are listed in config_keys(); unknown keys are rejected by name.
struct ExperimentConfig {
  double resolution = 0.04;
  PlannerConfig planner;
  CameraModel camera;
  DetectorModel detector;
  FusionParams fusion;
  EvaluationParams evaluation;
  SphericalShellSampler reach_shell;
  double reach_resolution = 0.05;
  std::int64_t reach_samples = 1'000'000;
  std::uint64_t reach_seed = 7;
  double travel_speed = 0.1;

  void validate() const {
    if (!(resolution > 0.0)) throw ConfigError("resolution must be positive");
    planner.validate();
    camera.validate();
    detector.validate();
    fusion.validate();
    if (!(evaluation.matching_radius > 0.0)) throw ConfigError("matching_radius must be positive");
    if (evaluation.min_cluster_size < 1) throw ConfigError("min_cluster_size must be >= 1");
    if (!(evaluation.detection_confidence_threshold >= 0.0 && evaluation.detection_confidence_threshold <= 1.0)) {
      throw ConfigError("detection_confidence_threshold must lie in [0,1]");
    }
    if (!(reach_shell.inner_radius >= 0.0 && reach_shell.inner_radius < reach_shell.outer_radius)) {
      throw ConfigError("reach radii must satisfy 0 <= inner < outer");
    }
    if (!(reach_resolution > 0.0)) throw ConfigError("reach_resolution must be positive");
    if (reach_samples < 1) throw ConfigError("reach_samples must be >= 1");
    if (!(travel_speed > 0.0)) throw ConfigError("travel_speed must be positive");
  }

  EpisodeSettings episode_settings() const {
    EpisodeSettings s;
    s.planner = planner;
    s.camera = camera;
    s.detector = detector;
    s.evaluation = evaluation;
    s.travel_speed = travel_speed;
    return s;
  }

  SemanticOctree make_map(const RoiBounds& bounds) const { return SemanticOctree(bounds, fusion); }

  ReachabilityGrid build_reach() const {
    Rng rng(reach_seed);
    return build_reachability(reach_shell.enclosing_bounds(reach_resolution), static_cast<std::size_t>(reach_samples),
                              reach_shell, rng);
  }
};

namespace detail {

struct ConfigKey {
  std::function<void(ExperimentConfig&, const nlohmann::json&)> set;
  std::function<nlohmann::json(const ExperimentConfig&)> get;
};

template <typename T>
T json_as(const nlohmann::json& v, const std::string& key) {
  if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' expects a number");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' expects an integer");
  }
  return v.get<T>();
}

inline std::map<std::string, ConfigKey> build_config_keys() {
  std::map<std::string, ConfigKey> k;
  auto num = [&k](const std::string& name, auto accessor) {
    k[name] = ConfigKey{
        [name, accessor](ExperimentConfig& c, const nlohmann::json& v) {
          auto& ref = accessor(c);
          ref = json_as<std::remove_cvref_t<decltype(ref)>>(v, name);
        },
        [accessor](const ExperimentConfig& c) {
          return nlohmann::json(accessor(c));
        }};
  };
  auto deg = [&k](const std::string& name, auto accessor) {
    k[name] = ConfigKey{[name, accessor](ExperimentConfig& c, const nlohmann::json& v) {
                          accessor(c) = deg2rad(json_as<double>(v, name));
                        },
                        [accessor](const ExperimentConfig& c) {
                          return nlohmann::json(accessor(c) * 180.0 / std::numbers::pi);
                        }};
  };

  num("resolution", [](auto& c) -> auto& { return c.resolution; });
  num("alpha", [](auto& c) -> auto& { return c.planner.alpha; });
  num("beta", [](auto& c) -> auto& { return c.planner.beta; });
  num("camera_max_range", [](auto& c) -> auto& { return c.camera.max_range; });
  num("detection_confidence_threshold",
      [](auto& c) -> auto& { return c.evaluation.detection_confidence_threshold; });
  k["background_confidence"] = ConfigKey{[](ExperimentConfig& c, const nlohmann::json& v) {
                                           const double b = json_as<double>(v, "background_confidence");
                                           c.fusion.background_confidence = b;
                                           c.detector.background_confidence = b;
                                         },
                                         [](const ExperimentConfig& c) {
                                           return nlohmann::json(c.fusion.background_confidence);
                                         }};

  num("tau_c", [](auto& c) -> auto& { return c.planner.tau_c; });
  num("overlap", [](auto& c) -> auto& { return c.planner.overlap; });
  num("stand_off", [](auto& c) -> auto& { return c.planner.stand_off; });
  num("cluster_cap", [](auto& c) -> auto& { return c.planner.cluster_cap; });
  num("hemisphere_samples", [](auto& c) -> auto& { return c.planner.hemisphere_samples; });
  num("radial_range_min", [](auto& c) -> auto& { return c.planner.radial_min; });
  num("radial_range_max", [](auto& c) -> auto& { return c.planner.radial_max; });
  num("ig_ray_rows", [](auto& c) -> auto& { return c.planner.ig_ray_rows; });
  num("ig_ray_cols", [](auto& c) -> auto& { return c.planner.ig_ray_cols; });
  deg("cone_half_angle_deg", [](auto& c) -> auto& { return c.planner.cone_half_angle; });
  num("perturbations_per_view", [](auto& c) -> auto& { return c.planner.perturbations_per_view; });

  deg("fov_h_deg", [](auto& c) -> auto& { return c.camera.theta_h; });
  deg("fov_v_deg", [](auto& c) -> auto& { return c.camera.theta_v; });
  num("sensor_ray_rows", [](auto& c) -> auto& { return c.camera.ray_rows; });
  num("sensor_ray_cols", [](auto& c) -> auto& { return c.camera.ray_cols; });

  num("gamma", [](auto& c) -> auto& { return c.fusion.gamma; });
  num("lambda", [](auto& c) -> auto& { return c.fusion.lambda; });
  num("hit_log_odds", [](auto& c) -> auto& { return c.fusion.hit_log_odds; });
  num("miss_log_odds", [](auto& c) -> auto& { return c.fusion.miss_log_odds; });
  num("log_odds_min", [](auto& c) -> auto& { return c.fusion.clamp_min; });
  num("log_odds_max", [](auto& c) -> auto& { return c.fusion.clamp_max; });
  num("occupancy_threshold", [](auto& c) -> auto& { return c.fusion.occupancy_threshold; });

  num("matching_radius", [](auto& c) -> auto& { return c.evaluation.matching_radius; });
  num("min_cluster_size", [](auto& c) -> auto& { return c.evaluation.min_cluster_size; });

  num("p_detect", [](auto& c) -> auto& { return c.detector.p_detect; });
  num("conf_mean", [](auto& c) -> auto& { return c.detector.conf_mean; });
  num("conf_spread", [](auto& c) -> auto& { return c.detector.conf_spread; });
  num("p_misclass", [](auto& c) -> auto& { return c.detector.p_misclass; });
  num("p_false_positive", [](auto& c) -> auto& { return c.detector.p_false_positive; });
  num("noise_seed", [](auto& c) -> auto& { return c.detector.noise_seed; });

  k["reach_base"] = ConfigKey{[](ExperimentConfig& c, const nlohmann::json& v) {
                                if (!v.is_array() || v.size() != 3) {
                                  throw ConfigError("config key 'reach_base' expects [x, y, z]");
                                }
                                for (int i = 0; i < 3; ++i) c.reach_shell.center[i] = json_as<double>(v[i], "reach_base");
                              },
                              [](const ExperimentConfig& c) {
                                const Vec3& p = c.reach_shell.center;
                                return nlohmann::json::array({p.x(), p.y(), p.z()});
                              }};
  num("reach_inner_radius", [](auto& c) -> auto& { return c.reach_shell.inner_radius; });
  num("reach_outer_radius", [](auto& c) -> auto& { return c.reach_shell.outer_radius; });
  num("reach_resolution", [](auto& c) -> auto& { return c.reach_resolution; });
  num("reach_samples", [](auto& c) -> auto& { return c.reach_samples; });
  num("reach_seed", [](auto& c) -> auto& { return c.reach_seed; });
  num("travel_speed", [](auto& c) -> auto& { return c.travel_speed; });
  return k;
}

}  // namespace detail

inline const std::map<std::string, detail::ConfigKey>& config_keys() {
  static const auto keys = detail::build_config_keys();
  return keys;
}

/// Applies the keys of `j` on top of `base`. The radial range follows stand_off (0.7 d, 1.2 d)
/// unless set explicitly.
inline ExperimentConfig apply_config(const nlohmann::json& j, ExperimentConfig base = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const auto& keys = config_keys();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.contains(it.key())) throw ConfigError("unknown config key '" + it.key() + "'");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    try {
      keys.at(it.key()).set(base, it.value());
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + it.key() + "' has the wrong type");
    }
  }
  if (j.contains("stand_off")) {
    if (!j.contains("radial_range_min")) base.planner.radial_min = 0.7 * base.planner.stand_off;
    if (!j.contains("radial_range_max")) base.planner.radial_max = 1.2 * base.planner.stand_off;
  }
  base.validate();
  return base;
}

inline ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return apply_config(j, std::move(base));
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

/// Every key with its current value, sorted by key.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, key] : config_keys()) j[name] = key.get(c);
  return j;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
  return buf;
}

}  // namespace canopy
