#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "canopy/errors.hpp"

namespace canopy {

enum class PlannerMode : std::uint8_t { Baseline, Volumetric, Semantic };

inline std::string_view to_string(PlannerMode m) {
  switch (m) {
    case PlannerMode::Baseline: return "baseline";
    case PlannerMode::Volumetric: return "volumetric";
    case PlannerMode::Semantic: return "semantic";
  }
  return "unknown";
}

inline PlannerMode parse_planner_mode(std::string_view s) {
  if (s == "baseline") return PlannerMode::Baseline;
  if (s == "volumetric") return PlannerMode::Volumetric;
  if (s == "semantic") return PlannerMode::Semantic;
  throw ConfigError("unknown planner mode '" + std::string(s) + "' (expected baseline, volumetric or semantic)");
}

}  // namespace canopy
