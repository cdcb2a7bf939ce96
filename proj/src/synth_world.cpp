#include "langact/synth_world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "langact/errors.hpp"

namespace langact {

EgoState bicycle_step(const EgoState& s, double accel, double steer, double dt, double wheelbase) {
    EgoState n = s;
    n.x += s.speed * std::cos(s.heading) * dt;
    n.y += s.speed * std::sin(s.heading) * dt;
    n.heading += (s.speed / wheelbase) * std::tan(steer) * dt;
    n.speed = std::max(0.0, s.speed + accel * dt);
    return n;
}

namespace {

struct Projection {
    std::size_t seg = 0;
    double t = 0.0;       // fraction along the segment
    double s = 0.0;       // arc length of the projection
    Waypoint point;
};

Projection project(const std::vector<Waypoint>& ref, double px, double py) {
    Projection best;
    double best_d2 = std::numeric_limits<double>::infinity();
    double s_acc = 0.0;
    if (ref.size() == 1) {
        best.point = ref.front();
        return best;
    }
    for (std::size_t i = 0; i + 1 < ref.size(); ++i) {
        const double ax = ref[i].x, ay = ref[i].y;
        const double dx = ref[i + 1].x - ax, dy = ref[i + 1].y - ay;
        const double len2 = dx * dx + dy * dy;
        const double len = std::sqrt(len2);
        double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double cx = ax + t * dx, cy = ay + t * dy;
        const double d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = {i, t, s_acc + t * len, {cx, cy}};
        }
        s_acc += len;
    }
    return best;
}

Waypoint point_at_arc(const std::vector<Waypoint>& ref, double s) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < ref.size(); ++i) {
        const double len = std::hypot(ref[i + 1].x - ref[i].x, ref[i + 1].y - ref[i].y);
        if (acc + len >= s && len > 0.0) {
            const double f = (s - acc) / len;
            return {ref[i].x + f * (ref[i + 1].x - ref[i].x), ref[i].y + f * (ref[i + 1].y - ref[i].y)};
        }
        acc += len;
    }
    return ref.back();
}

double wrap_angle(double a) {
    while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
    while (a < -std::numbers::pi) a += 2.0 * std::numbers::pi;
    return a;
}

}  // namespace

double cross_track_error(const EgoState& s, const std::vector<Waypoint>& reference) {
    const Projection p = project(reference, s.x, s.y);
    const double dx = p.point.x - s.x;
    const double dy = p.point.y - s.y;
    return -std::sin(s.heading) * dx + std::cos(s.heading) * dy;
}

ControlCommand PidTracker::track(const EgoState& s, const std::vector<Waypoint>& reference,
                                 double target_speed) {
    if (reference.empty()) {
        throw std::invalid_argument("pid_track: empty reference");
    }
    // Longitudinal.
    const double speed_err = target_speed - s.speed;
    // Lateral: bearing to a lookahead point plus weighted cross-track offset.
    const Projection p = project(reference, s.x, s.y);
    const double lookahead = std::max(gains_.lookahead_min, gains_.lookahead_time * s.speed);
    const Waypoint target = point_at_arc(reference, p.s + lookahead);
    const double bearing = wrap_angle(std::atan2(target.y - s.y, target.x - s.x) - s.heading);
    const double cte = -std::sin(s.heading) * (p.point.x - s.x) + std::cos(s.heading) * (p.point.y - s.y);
    const double lat_err = bearing + gains_.cross_track_weight * cte;

    const double d_speed = primed_ ? (speed_err - prev_speed_err_) / dt_ : 0.0;
    const double d_lat = primed_ ? (lat_err - prev_lat_err_) / dt_ : 0.0;
    speed_int_ = std::clamp(speed_int_ + speed_err * dt_, -5.0, 5.0);
    lat_int_ = std::clamp(lat_int_ + lat_err * dt_, -1.0, 1.0);
    prev_speed_err_ = speed_err;
    prev_lat_err_ = lat_err;
    primed_ = true;

    ControlCommand cmd;
    cmd.accel = gains_.speed_kp * speed_err + gains_.speed_ki * speed_int_ + gains_.speed_kd * d_speed;
    cmd.steer = gains_.lat_kp * lat_err + gains_.lat_ki * lat_int_ + gains_.lat_kd * d_lat;
    cmd.accel = std::clamp(cmd.accel, -limits_.a_max, limits_.a_max);
    cmd.steer = std::clamp(cmd.steer, -limits_.steer_max, limits_.steer_max);
    return cmd;
}

SimConfig SimConfig::load(const std::string& path) {
    YAML::Node doc;
    try {
        doc = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw DataError("cannot read sim config '" + path + "': " + e.what());
    }
    SimConfig c;
    auto rd = [&](const YAML::Node& node, const char* key, auto& field) {
        if (node && node[key]) {
            field = node[key].as<std::decay_t<decltype(field)>>();
        }
    };
    rd(doc, "dt", c.dt);
    rd(doc, "cruise_speed", c.cruise_speed);
    rd(doc, "cruise_jitter", c.cruise_jitter);
    rd(doc, "lane_width", c.lane_width);
    rd(doc, "speed_dt", c.speed_dt);
    rd(doc, "path_length", c.path_length);
    rd(doc, "speed_ramp", c.speed_ramp);
    rd(doc, "max_lane_points", c.max_lane_points);
    rd(doc, "max_attempts", c.max_attempts);
    const auto v = doc["vehicle"];
    rd(v, "wheelbase", c.vehicle.wheelbase);
    rd(v, "a_max", c.vehicle.a_max);
    rd(v, "steer_max", c.vehicle.steer_max);
    const auto g = doc["gains"];
    rd(g, "speed_kp", c.gains.speed_kp);
    rd(g, "speed_ki", c.gains.speed_ki);
    rd(g, "speed_kd", c.gains.speed_kd);
    rd(g, "lat_kp", c.gains.lat_kp);
    rd(g, "lat_ki", c.gains.lat_ki);
    rd(g, "lat_kd", c.gains.lat_kd);
    rd(g, "cross_track_weight", c.gains.cross_track_weight);
    rd(g, "lookahead_min", c.gains.lookahead_min);
    rd(g, "lookahead_time", c.gains.lookahead_time);
    return c;
}

nlohmann::json SimConfig::to_json() const {
    return {{"dt", dt},
            {"cruise_speed", cruise_speed},
            {"cruise_jitter", cruise_jitter},
            {"lane_width", lane_width},
            {"speed_dt", speed_dt},
            {"path_length", path_length},
            {"speed_ramp", speed_ramp},
            {"max_lane_points", max_lane_points},
            {"max_attempts", max_attempts},
            {"vehicle",
             {{"wheelbase", vehicle.wheelbase}, {"a_max", vehicle.a_max}, {"steer_max", vehicle.steer_max}}},
            {"gains",
             {{"speed_kp", gains.speed_kp},
              {"speed_ki", gains.speed_ki},
              {"speed_kd", gains.speed_kd},
              {"lat_kp", gains.lat_kp},
              {"lat_ki", gains.lat_ki},
              {"lat_kd", gains.lat_kd},
              {"cross_track_weight", gains.cross_track_weight},
              {"lookahead_min", gains.lookahead_min},
              {"lookahead_time", gains.lookahead_time}}}};
}

double snapped_path_length(const SimConfig& cfg, const GridSpec& spec) {
    return detokenize(tokenize_waypoint({cfg.path_length, 0.0}, spec), spec).x;
}

namespace {

// Road made of concentric arcs (or parallel lines when curvature == 0).
struct Road {
    double curvature = 0.0;
    std::vector<double> offsets;  // lateral offset of each lane from the ego lane, left positive
    int ego_lane = 0;

    Waypoint at(double s, double offset) const {
        if (curvature == 0.0) {
            return {s, offset};
        }
        const double a = curvature * s;
        return {std::sin(a) / curvature - offset * std::sin(a),
                (1.0 - std::cos(a)) / curvature + offset * std::cos(a)};
    }

    // Lateral offset of p relative to the ego lane centerline.
    double lateral_offset(const Waypoint& p) const {
        if (curvature == 0.0) {
            return p.y;
        }
        const double r = 1.0 / curvature;
        const double d = std::hypot(p.x, p.y - r);
        return (curvature > 0.0 ? 1.0 : -1.0) * (std::abs(r) - d);
    }

    std::vector<Waypoint> centerline(double offset, double s_max, double ds) const {
        std::vector<Waypoint> out;
        for (double s = 0.0; s <= s_max + 1e-9; s += ds) {
            out.push_back(at(s, offset));
        }
        return out;
    }
};

bool in_box(const Waypoint& w, const GridSpec& g) {
    return w.x >= g.x_min && w.x <= g.x_max && w.y >= g.y_min && w.y <= g.y_max;
}

Waypoint clamp_to_box(const Waypoint& w, const GridSpec& g) {
    return {std::clamp(w.x, g.x_min, g.x_max), std::clamp(w.y, g.y_min, g.y_max)};
}

using SpeedProfile = std::function<double(double)>;

// Closed-loop rollout from the ego origin. Returns states at every control step.
std::vector<EgoState> rollout(const std::vector<Waypoint>& reference, const SpeedProfile& profile,
                              double v0, int steps, const SimConfig& cfg) {
    PidTracker pid(cfg.gains, cfg.vehicle, cfg.dt);
    EgoState s{0.0, 0.0, 0.0, v0};
    std::vector<EgoState> out{s};
    out.reserve(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k < steps; ++k) {
        const double t = k * cfg.dt;
        const ControlCommand cmd = pid.track(s, reference, profile(t));
        s = bicycle_step(s, cmd.accel, cmd.steer, cfg.dt, cfg.vehicle.wheelbase);
        out.push_back(s);
    }
    return out;
}

// Path points at arc lengths i * length / n, i = 1..n, from a constant-speed rollout.
std::vector<Waypoint> path_rollout(const std::vector<Waypoint>& reference, double v0, double length,
                                   int n, const SimConfig& cfg) {
    const double v = std::max(v0, 1.0);
    const int steps = static_cast<int>(std::ceil((length + 2.0) / (v * cfg.dt)));
    const auto states = rollout(reference, [v](double) { return v; }, v, steps, cfg);
    std::vector<Waypoint> pts;
    pts.reserve(states.size());
    for (const auto& s : states) {
        pts.push_back({s.x, s.y});
    }
    std::vector<double> arc(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        arc[i] = arc[i - 1] + std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
    }
    std::vector<Waypoint> out;
    std::size_t seg = 0;
    for (int i = 1; i <= n; ++i) {
        const double target = length * static_cast<double>(i) / static_cast<double>(n);
        while (seg + 2 < pts.size() && arc[seg + 1] < target) {
            ++seg;
        }
        const double len = arc[seg + 1] - arc[seg];
        const double f = len > 0.0 ? (target - arc[seg]) / len : 0.0;
        out.push_back({pts[seg].x + f * (pts[seg + 1].x - pts[seg].x),
                       pts[seg].y + f * (pts[seg + 1].y - pts[seg].y)});
    }
    return out;
}

// Positions at t = k * speed_dt, k = 1..n.
std::vector<Waypoint> speed_rollout(const std::vector<Waypoint>& reference, const SpeedProfile& profile,
                                    double v0, int n, const SimConfig& cfg) {
    const int per = static_cast<int>(std::lround(cfg.speed_dt / cfg.dt));
    const auto states = rollout(reference, profile, v0, per * n, cfg);
    std::vector<Waypoint> out;
    for (int k = 1; k <= n; ++k) {
        const auto& s = states[static_cast<std::size_t>(k * per)];
        out.push_back({s.x, s.y});
    }
    return out;
}

std::string pick(std::mt19937_64& rng, const std::vector<std::string>& options) {
    std::uniform_int_distribution<std::size_t> d(0, options.size() - 1);
    return options[d(rng)];
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

const std::vector<std::string>& templates(InstructionClass c) {
    static const std::vector<std::string> faster = {"speed up", "drive faster", "accelerate now",
                                                    "increase your speed", "go faster please"};
    static const std::vector<std::string> slower = {"slow down", "drive slower", "reduce your speed",
                                                    "decelerate a bit", "go slower please"};
    static const std::vector<std::string> target = {
        "set your speed to {n} meters per second", "drive at {n} meters per second",
        "hold a speed of {n} meters per second", "change your speed to {n} meters per second"};
    static const std::vector<std::string> lane = {"change lane to the {side}", "switch to the {side} lane",
                                                  "move one lane to the {side}",
                                                  "do a lane change to the {side}"};
    static const std::vector<std::string> object = {"drive towards the obstacle {where}",
                                                    "go to the obstacle {where}",
                                                    "steer towards the object {where}",
                                                    "head for the obstacle {where}"};
    static const std::vector<std::string> stop = {"stop the car", "come to a stop", "stop now",
                                                  "brake to a full stop", "halt the vehicle"};
    switch (c) {
    case InstructionClass::kFaster: return faster;
    case InstructionClass::kSlower: return slower;
    case InstructionClass::kTargetSpeed: return target;
    case InstructionClass::kLaneChange: return lane;
    case InstructionClass::kObject: return object;
    case InstructionClass::kStop: return stop;
    }
    return stop;
}

const std::vector<std::string> kWhereLeft = {"on the left", "on your left"};
const std::vector<std::string> kWhereRight = {"on the right", "on your right"};
const std::vector<std::string> kWhereAhead = {"ahead", "in front"};
constexpr int kMinTargetSpeed = 2;
constexpr int kMaxTargetSpeed = 12;

enum class Side { kLeft, kRight, kAhead };

Side side_of(double lateral_offset) {
    if (lateral_offset > 1.75) return Side::kLeft;
    if (lateral_offset < -1.75) return Side::kRight;
    return Side::kAhead;
}

double smoothstep(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}

// One attempt; returns false when the draw is rejected.
bool try_generate(InstructionClass cls, std::mt19937_64& rng, const GridSpec& spec, const SimConfig& cfg,
                  Sample& out) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * unit(rng); };
    auto coin = [&](double p) { return unit(rng) < p; };

    Road road;
    road.curvature = coin(0.35) ? 0.0 : uni(-0.015, 0.015);
    const int n_lanes = 1 + static_cast<int>(unit(rng) * 3.0);
    road.ego_lane = static_cast<int>(unit(rng) * n_lanes);
    for (int j = 0; j < n_lanes; ++j) {
        road.offsets.push_back((j - road.ego_lane) * cfg.lane_width);
    }
    const double v0 = uni(cfg.cruise_speed - cfg.cruise_jitter, cfg.cruise_speed + cfg.cruise_jitter);
    const double path_len = snapped_path_length(cfg, spec);
    const int n_path = 20;
    const int n_speed = 10;

    Scene scene;
    scene.ego_speed = v0;
    for (double off : road.offsets) {
        std::vector<Waypoint> lane;
        for (const auto& p : road.centerline(off, 50.0, 2.0)) {
            if (in_box(p, spec)) {
                lane.push_back(p);
            }
        }
        scene.lanes.push_back(std::move(lane));
    }
    scene.target_point = clamp_to_box(road.at(45.0, 0.0), spec);

    // Background obstacles.
    const double outer_left = road.offsets.back();
    const double outer_right = road.offsets.front();
    auto random_obstacle = [&]() {
        const double s = uni(8.0, 45.0);
        double off;
        if (coin(0.6)) {
            off = road.offsets[static_cast<std::size_t>(unit(rng) * n_lanes)] + uni(-0.5, 0.5);
        } else {
            off = coin(0.5) ? outer_left + uni(2.5, 5.0) : outer_right - uni(2.5, 5.0);
        }
        const Waypoint p = clamp_to_box(road.at(s, off), spec);
        return SceneObject{"obstacle", p.x, p.y};
    };
    const int n_background = static_cast<int>(unit(rng) * (cls == InstructionClass::kObject ? 4 : 5));
    for (int i = 0; i < n_background; ++i) {
        scene.objects.push_back(random_obstacle());
    }

    const auto ego_ref = road.centerline(0.0, 70.0, 0.5);
    auto constant = [v0](double) { return v0; };
    const auto expert_path = path_rollout(ego_ref, v0, path_len, n_path, cfg);
    const auto expert_speed = speed_rollout(ego_ref, constant, v0, n_speed, cfg);

    std::vector<Waypoint> dreamer_ref = ego_ref;
    SpeedProfile profile = constant;
    std::optional<double> target_speed;
    std::string text = pick(rng, templates(cls));
    const double ramp = cfg.speed_ramp;

    auto ramp_to = [v0, ramp](double goal) {
        return SpeedProfile([v0, ramp, goal](double t) {
            const double dv = std::min(ramp * t, std::abs(goal - v0));
            return goal >= v0 ? v0 + dv : v0 - dv;
        });
    };

    switch (cls) {
    case InstructionClass::kFaster: {
        profile = ramp_to(v0 + uni(2.0, 4.0));
        break;
    }
    case InstructionClass::kSlower: {
        profile = ramp_to(std::max(0.5, v0 - uni(2.0, 4.0)));
        break;
    }
    case InstructionClass::kTargetSpeed: {
        std::uniform_int_distribution<int> d(kMinTargetSpeed, kMaxTargetSpeed);
        const int n = d(rng);
        if (std::abs(n - v0) < 2.0) {
            return false;
        }
        target_speed = n;
        profile = ramp_to(n);
        text = replace_all(text, "{n}", std::to_string(n));
        break;
    }
    case InstructionClass::kLaneChange: {
        const bool left = coin(0.5);
        const int dest = road.ego_lane + (left ? 1 : -1);
        if (dest < 0 || dest >= n_lanes) {
            return false;
        }
        const double target_off = road.offsets[static_cast<std::size_t>(dest)];
        const double start = uni(0.0, 3.0);
        const double length = uni(9.0, 13.0);
        dreamer_ref.clear();
        for (double s = 0.0; s <= 70.0; s += 0.5) {
            dreamer_ref.push_back(road.at(s, target_off * smoothstep((s - start) / length)));
        }
        text = replace_all(text, "{side}", left ? "left" : "right");
        break;
    }
    case InstructionClass::kObject: {
        const int which = static_cast<int>(unit(rng) * 3.0);
        const Side side = static_cast<Side>(which);
        const double s = uni(12.0, 25.0);
        double off = 0.0;
        if (side == Side::kLeft) off = uni(2.5, 8.0);
        else if (side == Side::kRight) off = uni(-8.0, -2.5);
        else off = uni(-0.5, 0.5);
        const Waypoint obj = road.at(s, off);
        if (!in_box(obj, spec)) {
            return false;
        }
        for (const auto& o : scene.objects) {
            if (side_of(road.lateral_offset({o.x, o.y})) == side) {
                return false;
            }
        }
        scene.objects.push_back({"obstacle", obj.x, obj.y});
        const double norm = std::hypot(obj.x, obj.y);
        dreamer_ref.clear();
        for (double t = 0.0; t <= norm + 40.0; t += 0.5) {
            dreamer_ref.push_back({obj.x * t / norm, obj.y * t / norm});
        }
        const auto& where = side == Side::kLeft ? kWhereLeft : side == Side::kRight ? kWhereRight : kWhereAhead;
        text = replace_all(text, "{where}", pick(rng, where));
        break;
    }
    case InstructionClass::kStop: {
        const double a = cfg.vehicle.a_max;
        profile = [v0, a](double t) { return std::max(v0 - a * t, -1.0); };
        break;
    }
    }

    Sample s;
    s.cls = cls;
    s.instruction = text;
    s.scene = std::move(scene);
    s.expert_path = expert_path;
    s.expert_speed_wps = expert_speed;
    s.dreamer_path = (dreamer_ref == ego_ref) ? expert_path : path_rollout(dreamer_ref, v0, path_len, n_path, cfg);
    s.dreamer_speed_wps = speed_rollout(dreamer_ref, profile, v0, n_speed, cfg);
    s.target_speed = target_speed;

    for (const auto* traj : {&s.expert_path, &s.expert_speed_wps, &s.dreamer_path, &s.dreamer_speed_wps}) {
        for (const auto& w : *traj) {
            if (!in_box(w, spec)) {
                return false;
            }
        }
    }
    if (cls == InstructionClass::kLaneChange) {
        const double lat = std::abs(road.lateral_offset(s.dreamer_path.back()) -
                                    road.lateral_offset(s.expert_path.back()));
        if (lat < 0.5 * cfg.lane_width) {
            return false;
        }
    }
    EvalParams ep;
    ep.dt = cfg.speed_dt;
    if (!evaluate_sample(dreamer_as_prediction(s), s, ep).success) {
        return false;
    }
    out = std::move(s);
    return true;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

Sample generate_scenario(InstructionClass cls, std::uint64_t seed, const GridSpec& spec, const SimConfig& cfg) {
    std::mt19937_64 rng(splitmix64(seed));
    Sample s;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        if (try_generate(cls, rng, spec, cfg, s)) {
            s.seed = seed;
            return s;
        }
    }
    throw DataError("scenario generation for class " + std::string(class_name(cls)) + " seed " +
                    std::to_string(seed) + " failed after " + std::to_string(cfg.max_attempts) + " attempts");
}

ClassMix uniform_mix() {
    ClassMix m;
    m.fill(1.0 / 6.0);
    return m;
}

ClassMix parse_mix(const std::string& text) {
    if (text.empty() || text == "uniform") {
        return uniform_mix();
    }
    ClassMix m{};
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw UsageError("mix entry '" + item + "' must look like Class=weight");
        }
        InstructionClass c;
        try {
            c = parse_class(item.substr(0, eq));
        } catch (const DataError& e) {
            throw UsageError(e.what());
        }
        double w = 0.0;
        try {
            w = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw UsageError("bad weight in mix entry '" + item + "'");
        }
        if (w < 0.0) {
            throw UsageError("mix weights must be non-negative");
        }
        m[static_cast<std::size_t>(c)] = w;
    }
    double total = 0.0;
    for (double w : m) total += w;
    if (!(total > 0.0)) {
        throw UsageError("mix weights sum to zero");
    }
    for (double& w : m) w /= total;
    return m;
}

std::array<int, 6> allocate_counts(int n, const ClassMix& mix) {
    std::array<int, 6> counts{};
    std::array<double, 6> rem{};
    int used = 0;
    for (std::size_t i = 0; i < 6; ++i) {
        const double exact = mix[i] * n;
        counts[i] = static_cast<int>(std::floor(exact));
        rem[i] = exact - counts[i];
        used += counts[i];
    }
    while (used < n) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < 6; ++i) {
            if (rem[i] > rem[best] + 1e-12) best = i;
        }
        if (mix[best] <= 0.0) break;
        ++counts[best];
        rem[best] = -1.0;
        ++used;
    }
    return counts;
}

nlohmann::json DatasetSummary::to_json() const {
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t i = 0; i < 6; ++i) {
        per[std::string(class_name(kAllClasses[i]))] = per_class[i];
    }
    return {{"n", n},
            {"per_class", per},
            {"mean_path_length", mean_path_length},
            {"mean_final_speed", mean_final_speed},
            {"mean_ego_speed", mean_ego_speed}};
}

std::vector<Sample> generate_dataset(int n, const ClassMix& mix, std::uint64_t seed, const GridSpec& spec,
                                     const SimConfig& cfg) {
    if (n < 1) {
        throw UsageError("dataset size must be >= 1");
    }
    const auto counts = allocate_counts(n, mix);
    std::vector<InstructionClass> order;
    for (std::size_t i = 0; i < 6; ++i) {
        order.insert(order.end(), static_cast<std::size_t>(counts[i]), kAllClasses[i]);
    }
    std::mt19937_64 rng(splitmix64(seed ^ 0x5eedULL));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Sample> out;
    out.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        out.push_back(generate_scenario(order[i], splitmix64(seed) ^ splitmix64(i + 1), spec, cfg));
    }
    return out;
}

DatasetSummary summarize(const std::vector<Sample>& samples, double speed_dt) {
    DatasetSummary s;
    s.n = static_cast<int>(samples.size());
    for (const auto& x : samples) {
        ++s.per_class[static_cast<std::size_t>(x.cls)];
        double len = std::hypot(x.dreamer_path.front().x, x.dreamer_path.front().y);
        for (std::size_t i = 1; i < x.dreamer_path.size(); ++i) {
            len += std::hypot(x.dreamer_path[i].x - x.dreamer_path[i - 1].x,
                              x.dreamer_path[i].y - x.dreamer_path[i - 1].y);
        }
        s.mean_path_length += len;
        s.mean_final_speed += speeds_from_waypoints(x.dreamer_speed_wps, speed_dt).back();
        s.mean_ego_speed += x.scene.ego_speed;
    }
    if (s.n > 0) {
        s.mean_path_length /= s.n;
        s.mean_final_speed /= s.n;
        s.mean_ego_speed /= s.n;
    }
    return s;
}

DatasetSummary build_dataset(int n, const ClassMix& mix, std::uint64_t seed, const std::string& out_path,
                             const GridSpec& spec, const SimConfig& cfg) {
    const auto samples = generate_dataset(n, mix, seed, spec, cfg);
    write_samples(out_path, samples);
    return summarize(samples, cfg.speed_dt);
}

std::vector<TokenId> scene_to_tokens(const Scene& scene, const Codebook& cb, int max_lane_points) {
    struct Element {
        Special cls;
        Waypoint p;
    };
    const GridSpec& g = cb.grid();
    std::vector<Element> elems;
    for (const auto& lane : scene.lanes) {
        const std::size_t n = lane.size();
        const auto m = static_cast<std::size_t>(std::max(0, max_lane_points));
        if (n <= m) {
            for (const auto& p : lane) elems.push_back({Special::kClsLane, clamp_to_box(p, g)});
        } else if (m == 1) {
            elems.push_back({Special::kClsLane, clamp_to_box(lane.front(), g)});
        } else if (m > 1) {
            for (std::size_t j = 0; j < m; ++j) {
                const std::size_t idx = (j * (n - 1) + (m - 1) / 2) / (m - 1);
                elems.push_back({Special::kClsLane, clamp_to_box(lane[idx], g)});
            }
        }
    }
    for (const auto& o : scene.objects) {
        elems.push_back({Special::kClsObstacle, clamp_to_box({o.x, o.y}, g)});
    }
    if (scene.target_point) {
        elems.push_back({Special::kClsTarget, clamp_to_box(*scene.target_point, g)});
    }
    if (scene.ego_speed > 0.0) {
        // Distance covered in one second at the current speed.
        elems.push_back({Special::kClsEgo, clamp_to_box({scene.ego_speed, 0.0}, g)});
    }
    std::sort(elems.begin(), elems.end(), [](const Element& a, const Element& b) {
        if (a.cls != b.cls) return static_cast<int>(a.cls) < static_cast<int>(b.cls);
        if (a.p.x != b.p.x) return a.p.x < b.p.x;
        return a.p.y < b.p.y;
    });
    std::vector<TokenId> out;
    out.reserve(elems.size() * 2);
    for (const auto& e : elems) {
        out.push_back(cb.special(e.cls));
        out.push_back(cb.action(tokenize_waypoint(e.p, g)));
    }
    return out;
}

std::vector<std::string> instruction_vocabulary() {
    std::set<std::string> words;
    auto add = [&](const std::string& text) {
        for (auto& w : normalize_text(text)) {
            words.insert(w);
        }
    };
    for (auto c : kAllClasses) {
        for (const auto& t : templates(c)) {
            add(replace_all(replace_all(replace_all(t, "{n}", ""), "{side}", "left right"), "{where}", ""));
        }
    }
    for (const auto* group : {&kWhereLeft, &kWhereRight, &kWhereAhead}) {
        for (const auto& w : *group) add(w);
    }
    for (int n = kMinTargetSpeed; n <= kMaxTargetSpeed; ++n) {
        words.insert(std::to_string(n));
    }
    return {words.begin(), words.end()};
}

}  // namespace langact
