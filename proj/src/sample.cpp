#include "langact/sample.hpp"

#include <fstream>

#include "langact/errors.hpp"

namespace langact {

namespace {

constexpr std::array<std::string_view, 6> kClassNames = {"Faster",     "Slower", "TargetSpeed",
                                                         "LaneChange", "Object", "Stop"};

}  // namespace

std::string_view class_name(InstructionClass c) { return kClassNames[static_cast<std::size_t>(c)]; }

InstructionClass parse_class(std::string_view name) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i) {
        if (kClassNames[i] == name) {
            return static_cast<InstructionClass>(i);
        }
    }
    throw DataError("unknown instruction class '" + std::string(name) + "'");
}

nlohmann::json waypoints_to_json(const std::vector<Waypoint>& wps) {
    auto arr = nlohmann::json::array();
    for (const auto& w : wps) {
        arr.push_back({w.x, w.y});
    }
    return arr;
}

std::vector<Waypoint> waypoints_from_json(const nlohmann::json& j) {
    std::vector<Waypoint> out;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 2) {
            throw DataError("waypoint must be an [x, y] pair");
        }
        out.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return out;
}

nlohmann::json to_json(const Sample& s) {
    nlohmann::json lanes = nlohmann::json::array();
    for (const auto& lane : s.scene.lanes) {
        lanes.push_back(waypoints_to_json(lane));
    }
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& o : s.scene.objects) {
        objects.push_back({o.cls, o.x, o.y});
    }
    nlohmann::json scene = {
        {"lanes", lanes},
        {"objects", objects},
        {"target_point", s.scene.target_point
                             ? nlohmann::json{s.scene.target_point->x, s.scene.target_point->y}
                             : nlohmann::json(nullptr)},
        {"ego_speed", s.scene.ego_speed},
    };
    nlohmann::json j;
    j["class"] = class_name(s.cls);
    j["instruction"] = s.instruction;
    j["scene"] = scene;
    j["expert_path"] = waypoints_to_json(s.expert_path);
    j["expert_speed_wps"] = waypoints_to_json(s.expert_speed_wps);
    j["dreamer_path"] = waypoints_to_json(s.dreamer_path);
    j["dreamer_speed_wps"] = waypoints_to_json(s.dreamer_speed_wps);
    j["target_speed"] = s.target_speed ? nlohmann::json(*s.target_speed) : nlohmann::json(nullptr);
    j["seed"] = s.seed;
    return j;
}

Sample sample_from_json(const nlohmann::json& j) {
    try {
        Sample s;
        s.cls = parse_class(j.at("class").get<std::string>());
        s.instruction = j.at("instruction").get<std::string>();
        const auto& scene = j.at("scene");
        for (const auto& lane : scene.at("lanes")) {
            s.scene.lanes.push_back(waypoints_from_json(lane));
        }
        for (const auto& o : scene.at("objects")) {
            s.scene.objects.push_back({o.at(0).get<std::string>(), o.at(1).get<double>(),
                                       o.at(2).get<double>()});
        }
        if (const auto& tp = scene.at("target_point"); !tp.is_null()) {
            s.scene.target_point = Waypoint{tp.at(0).get<double>(), tp.at(1).get<double>()};
        }
        s.scene.ego_speed = scene.value("ego_speed", 0.0);
        s.expert_path = waypoints_from_json(j.at("expert_path"));
        s.expert_speed_wps = waypoints_from_json(j.at("expert_speed_wps"));
        s.dreamer_path = waypoints_from_json(j.at("dreamer_path"));
        s.dreamer_speed_wps = waypoints_from_json(j.at("dreamer_speed_wps"));
        if (const auto& ts = j.at("target_speed"); !ts.is_null()) {
            s.target_speed = ts.get<double>();
        }
        s.seed = j.value("seed", std::uint64_t{0});
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed sample record: ") + e.what());
    }
}

std::vector<Sample> read_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open dataset '" + path + "'");
    }
    std::vector<Sample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            out.push_back(sample_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_samples(const std::string& path, const std::vector<Sample>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write dataset '" + path + "'");
    }
    for (const auto& s : samples) {
        out << to_json(s).dump() << '\n';
    }
    if (!out) {
        throw DataError("write failed for '" + path + "'");
    }
}

}  // namespace langact
