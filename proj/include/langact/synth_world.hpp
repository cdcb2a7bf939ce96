#pragma once

// Synthetic driving world: kinematic bicycle model tracked by PID controllers.
// Expert and dreamer trajectories are always closed-loop rollouts.

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "langact/codebook.hpp"
#include "langact/dreaming_eval.hpp"
#include "langact/sample.hpp"

namespace langact {

struct EgoState {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;  // rad
    double speed = 0.0;    // m/s, >= 0
};

EgoState bicycle_step(const EgoState& s, double accel, double steer, double dt, double wheelbase);

struct PidGains {
    double speed_kp = 3.0;
    double speed_ki = 0.1;
    double speed_kd = 0.0;
    double lat_kp = 1.0;
    double lat_ki = 0.0;
    double lat_kd = 0.05;
    double cross_track_weight = 0.2;  // rad per meter of cross-track error
    double lookahead_min = 4.0;       // m
    double lookahead_time = 0.8;      // s, lookahead grows with speed
};

struct VehicleLimits {
    double wheelbase = 2.9;
    double a_max = 3.0;
    double steer_max = 0.5;
};

struct ControlCommand {
    double accel = 0.0;
    double steer = 0.0;
};

// Stateful PID pair; integrators and previous errors persist across calls.
class PidTracker {
public:
    PidTracker(const PidGains& gains, const VehicleLimits& limits, double dt)
        : gains_(gains), limits_(limits), dt_(dt) {}

    // Reference polyline in the ego frame (non-empty) and the speed setpoint.
    ControlCommand track(const EgoState& s, const std::vector<Waypoint>& reference, double target_speed);

    // Raw error signals of the last call, for inspection.
    double last_speed_error() const { return prev_speed_err_; }
    double last_lateral_error() const { return prev_lat_err_; }

private:
    PidGains gains_;
    VehicleLimits limits_;
    double dt_;
    double speed_int_ = 0.0;
    double lat_int_ = 0.0;
    double prev_speed_err_ = 0.0;
    double prev_lat_err_ = 0.0;
    bool primed_ = false;
};

// Signed lateral offset of p from the polyline (positive = polyline to the left).
double cross_track_error(const EgoState& s, const std::vector<Waypoint>& reference);

struct SimConfig {
    VehicleLimits vehicle;
    PidGains gains;
    double dt = 0.05;
    double cruise_speed = 6.0;
    double cruise_jitter = 3.0;  // ego speed ~ U[cruise - jitter, cruise + jitter]
    double lane_width = 3.5;
    double speed_dt = 0.2;       // speed-waypoint timebase
    double path_length = 20.0;   // nominal; snapped to a grid cell center along x
    double speed_ramp = 2.5;     // m/s^2 of the reference speed profiles
    int max_lane_points = 6;     // lane points per lane in the scene tokens
    int max_attempts = 100;

    static SimConfig load(const std::string& path);
    nlohmann::json to_json() const;
};

// Path arc length actually used: the x-center of the grid cell that contains
// path_length, so a straight path ends on a cell center.
double snapped_path_length(const SimConfig& cfg, const GridSpec& spec);

// Throws DataError when no valid scene is found within max_attempts.
Sample generate_scenario(InstructionClass cls, std::uint64_t seed, const GridSpec& spec,
                         const SimConfig& cfg = {});

using ClassMix = std::array<double, 6>;
ClassMix uniform_mix();
// "Faster=1,Stop=2" style; weights are normalized. Throws UsageError.
ClassMix parse_mix(const std::string& text);
// Largest-remainder allocation of n samples to classes.
std::array<int, 6> allocate_counts(int n, const ClassMix& mix);

struct DatasetSummary {
    int n = 0;
    std::array<int, 6> per_class{};
    double mean_path_length = 0.0;
    double mean_final_speed = 0.0;
    double mean_ego_speed = 0.0;
    nlohmann::json to_json() const;
};

std::vector<Sample> generate_dataset(int n, const ClassMix& mix, std::uint64_t seed, const GridSpec& spec,
                                     const SimConfig& cfg = {});
DatasetSummary summarize(const std::vector<Sample>& samples, double speed_dt);
// Streams samples to a JSONL file and returns the summary.
DatasetSummary build_dataset(int n, const ClassMix& mix, std::uint64_t seed, const std::string& out_path,
                             const GridSpec& spec, const SimConfig& cfg = {});

// Canonical V segment: (class token, cell token) per element, sorted by
// (class, x, y). Lanes are subsampled to at most max_lane_points points.
std::vector<TokenId> scene_to_tokens(const Scene& scene, const Codebook& cb, int max_lane_points = 6);

// Every word the instruction templates can emit.
std::vector<std::string> instruction_vocabulary();

}  // namespace langact
