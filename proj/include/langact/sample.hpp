#pragma once

// Dataset record: scene context, instruction, expert and dreamer trajectories.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "langact/grid_codec.hpp"

namespace langact {

enum class InstructionClass : int { kFaster = 0, kSlower, kTargetSpeed, kLaneChange, kObject, kStop };

inline constexpr std::array<InstructionClass, 6> kAllClasses = {
    InstructionClass::kFaster,     InstructionClass::kSlower, InstructionClass::kTargetSpeed,
    InstructionClass::kLaneChange, InstructionClass::kObject, InstructionClass::kStop,
};

std::string_view class_name(InstructionClass c);
// Throws DataError for unknown names.
InstructionClass parse_class(std::string_view name);

struct SceneObject {
    std::string cls = "obstacle";
    double x = 0.0;
    double y = 0.0;
};

struct Scene {
    std::vector<std::vector<Waypoint>> lanes;
    std::vector<SceneObject> objects;
    std::optional<Waypoint> target_point;
    double ego_speed = 0.0;  // m/s at t = 0
};

struct Sample {
    Scene scene;
    std::string instruction;
    InstructionClass cls = InstructionClass::kFaster;
    std::vector<Waypoint> expert_path;
    std::vector<Waypoint> expert_speed_wps;
    std::vector<Waypoint> dreamer_path;
    std::vector<Waypoint> dreamer_speed_wps;
    std::optional<double> target_speed;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const Sample& s);
// Throws DataError on schema violations.
Sample sample_from_json(const nlohmann::json& j);

std::vector<Sample> read_samples(const std::string& path);
void write_samples(const std::string& path, const std::vector<Sample>& samples);

nlohmann::json waypoints_to_json(const std::vector<Waypoint>& wps);
std::vector<Waypoint> waypoints_from_json(const nlohmann::json& j);

}  // namespace langact
