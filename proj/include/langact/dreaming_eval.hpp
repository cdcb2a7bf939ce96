#pragma once

// Instruction-following success criteria for the six dreaming classes.
// All strict inequalities treat equality as failure.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "langact/sample.hpp"

namespace langact {

struct EvalParams {
    double dt = 0.2;                 // speed-waypoint timebase, s
    double faster_slope_frac = 0.05; // |slope| must exceed this fraction of the start speed
    double target_band = 0.20;
    double object_ade_gate = 1.0;    // m
    double object_speed_band = 0.30;
    double stop_speed = 0.1;         // m/s
};

struct Prediction {
    std::vector<Waypoint> path;
    std::vector<Waypoint> speed_wps;
};

std::vector<double> speeds_from_waypoints(std::span<const Waypoint> wps, double dt);
// OLS slope of speeds[i] against t_i = i * dt.
double regression_slope(std::span<const double> speeds, double dt);
// Mean pointwise distance; the longer trajectory is resampled by arc length
// to the shorter one's point count first.
double ade(std::span<const Waypoint> a, std::span<const Waypoint> b);
std::vector<Waypoint> resample_by_arc_length(std::span<const Waypoint> wps, std::size_t count);

struct Verdict {
    bool success = false;
    std::string diagnostics;
};

// Throws std::invalid_argument when the prediction blocks are not 20 / 10 long.
Verdict evaluate_sample(const Prediction& pred, const Sample& sample, const EvalParams& params = {});

struct ClassRate {
    InstructionClass cls = InstructionClass::kFaster;
    int n = 0;
    int successes = 0;
    std::optional<double> rate() const;
};

struct DreamingReport {
    std::array<ClassRate, 6> classes{};
    // Unweighted mean over classes with at least one sample.
    std::optional<double> mean() const;
    std::string to_csv() const;
    std::string pretty() const;
};

DreamingReport evaluate_dataset(std::span<const Prediction> preds, std::span<const Sample> samples,
                                const EvalParams& params = {});

Prediction dreamer_as_prediction(const Sample& s);

// Prediction file: dataset records plus "pred_path" / "pred_speed_wps".
std::vector<Prediction> read_predictions(const std::string& path);
void write_predictions(const std::string& path, std::span<const Sample> samples,
                       std::span<const Prediction> preds);

}  // namespace langact
