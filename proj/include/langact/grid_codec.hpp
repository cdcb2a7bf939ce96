#pragma once

// Signed-log BEV grid: maps continuous ego-frame waypoints to discrete action
// token ids and back. Cells are uniform in the transformed space
// T(z) = sign(z) * ln(1 + k|z|), so resolution is finest near the ego vehicle.

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace langact {

struct Waypoint {
    double x = 0.0;  // longitudinal, meters
    double y = 0.0;  // lateral, meters (positive = left)

    friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

using ActionTokenId = std::int32_t;

struct GridSize {
    int n_x = 0;
    int n_y = 0;
    int k_action = 0;

    friend bool operator==(const GridSize&, const GridSize&) = default;
};

struct GridSpec {
    double x_min = 0.0;
    double x_max = 50.0;
    double y_min = -30.0;
    double y_max = 30.0;
    double k = 5.0;
    double step = 0.1;

    // Throws std::invalid_argument when the geometry is degenerate.
    void validate() const;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

double log_transform(double z, double k);
double inverse_log_transform(double z_t, double k);

GridSize grid_size(const GridSpec& spec);

struct CellIndex {
    int i_x = 0;
    int i_y = 0;
};

// Out-of-range waypoints clamp to the boundary cells.
ActionTokenId tokenize_waypoint(const Waypoint& w, const GridSpec& spec);
CellIndex cell_of(ActionTokenId id, const GridSpec& spec);
ActionTokenId token_of(CellIndex cell, const GridSpec& spec);

// Cell center in metric space, clamped to the declared box.
// Throws std::out_of_range for ids outside [0, K_action).
Waypoint detokenize(ActionTokenId id, const GridSpec& spec);

// Metric extent [lo, hi) of cell i along one axis (unclamped).
struct CellExtent {
    double lo = 0.0;
    double hi = 0.0;
};
CellExtent cell_extent_x(int i_x, const GridSpec& spec);
CellExtent cell_extent_y(int i_y, const GridSpec& spec);

nlohmann::json to_json(const GridSpec& spec);
GridSpec grid_spec_from_json(const nlohmann::json& j);
// Reads a `key: value` config document (x_min, x_max, y_min, y_max, k, step).
GridSpec load_grid_spec(const std::string& path);

}  // namespace langact
