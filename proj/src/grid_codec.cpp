#include "langact/grid_codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <yaml-cpp/yaml.h>

#include "langact/errors.hpp"

namespace langact {

namespace {

// Guards floor() against representation error when a range is an exact
// multiple of the step.
constexpr double kBinSlack = 1e-9;

int axis_cells(double lo, double hi, double k, double step) {
    const double width = log_transform(hi, k) - log_transform(lo, k);
    return static_cast<int>(std::floor(width / step + kBinSlack)) + 1;
}

int axis_index(double z, double lo, double k, double step, int n) {
    const double u = (log_transform(z, k) - log_transform(lo, k)) / step;
    const int i = static_cast<int>(std::floor(u));
    return std::clamp(i, 0, n - 1);
}

double axis_center(int i, double lo, double hi, double k, double step) {
    const double t = log_transform(lo, k) + (static_cast<double>(i) + 0.5) * step;
    return std::clamp(inverse_log_transform(t, k), lo, hi);
}

CellExtent axis_extent(int i, double lo, double k, double step) {
    const double t0 = log_transform(lo, k) + static_cast<double>(i) * step;
    return {inverse_log_transform(t0, k), inverse_log_transform(t0 + step, k)};
}

}  // namespace

void GridSpec::validate() const {
    if (!(x_min < x_max) || !(y_min < y_max)) {
        throw std::invalid_argument("grid spec: empty coordinate range");
    }
    if (!(k > 0.0) || !(step > 0.0)) {
        throw std::invalid_argument("grid spec: k and step must be positive");
    }
    if (!std::isfinite(x_min) || !std::isfinite(x_max) || !std::isfinite(y_min) ||
        !std::isfinite(y_max) || !std::isfinite(k) || !std::isfinite(step)) {
        throw std::invalid_argument("grid spec: non-finite field");
    }
}

double log_transform(double z, double k) {
    if (!std::isfinite(z) || !std::isfinite(k)) {
        throw std::domain_error("log_transform: non-finite input");
    }
    if (!(k > 0.0)) {
        throw std::domain_error("log_transform: k must be positive");
    }
    const double mag = std::log1p(k * std::abs(z));
    return z < 0.0 ? -mag : mag;
}

double inverse_log_transform(double z_t, double k) {
    if (!std::isfinite(z_t) || !std::isfinite(k)) {
        throw std::domain_error("inverse_log_transform: non-finite input");
    }
    if (!(k > 0.0)) {
        throw std::domain_error("inverse_log_transform: k must be positive");
    }
    const double mag = std::expm1(std::abs(z_t)) / k;
    return z_t < 0.0 ? -mag : mag;
}

GridSize grid_size(const GridSpec& spec) {
    spec.validate();
    GridSize g;
    g.n_x = axis_cells(spec.x_min, spec.x_max, spec.k, spec.step);
    g.n_y = axis_cells(spec.y_min, spec.y_max, spec.k, spec.step);
    g.k_action = g.n_x * g.n_y;
    return g;
}

ActionTokenId tokenize_waypoint(const Waypoint& w, const GridSpec& spec) {
    const GridSize g = grid_size(spec);
    const int ix = axis_index(w.x, spec.x_min, spec.k, spec.step, g.n_x);
    const int iy = axis_index(w.y, spec.y_min, spec.k, spec.step, g.n_y);
    return ix * g.n_y + iy;
}

CellIndex cell_of(ActionTokenId id, const GridSpec& spec) {
    const GridSize g = grid_size(spec);
    if (id < 0 || id >= g.k_action) {
        throw std::out_of_range("action token id " + std::to_string(id) + " outside grid");
    }
    return {id / g.n_y, id % g.n_y};
}

ActionTokenId token_of(CellIndex cell, const GridSpec& spec) {
    const GridSize g = grid_size(spec);
    if (cell.i_x < 0 || cell.i_x >= g.n_x || cell.i_y < 0 || cell.i_y >= g.n_y) {
        throw std::out_of_range("cell index outside grid");
    }
    return cell.i_x * g.n_y + cell.i_y;
}

Waypoint detokenize(ActionTokenId id, const GridSpec& spec) {
    const CellIndex c = cell_of(id, spec);
    return {axis_center(c.i_x, spec.x_min, spec.x_max, spec.k, spec.step),
            axis_center(c.i_y, spec.y_min, spec.y_max, spec.k, spec.step)};
}

CellExtent cell_extent_x(int i_x, const GridSpec& spec) {
    return axis_extent(i_x, spec.x_min, spec.k, spec.step);
}

CellExtent cell_extent_y(int i_y, const GridSpec& spec) {
    return axis_extent(i_y, spec.y_min, spec.k, spec.step);
}

nlohmann::json to_json(const GridSpec& spec) {
    return {{"x_min", spec.x_min}, {"x_max", spec.x_max}, {"y_min", spec.y_min},
            {"y_max", spec.y_max}, {"k", spec.k},         {"step", spec.step}};
}

GridSpec grid_spec_from_json(const nlohmann::json& j) {
    GridSpec s;
    s.x_min = j.at("x_min").get<double>();
    s.x_max = j.at("x_max").get<double>();
    s.y_min = j.at("y_min").get<double>();
    s.y_max = j.at("y_max").get<double>();
    s.k = j.at("k").get<double>();
    s.step = j.at("step").get<double>();
    s.validate();
    return s;
}

GridSpec load_grid_spec(const std::string& path) {
    YAML::Node doc;
    try {
        doc = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw DataError("cannot read grid spec '" + path + "': " + e.what());
    }
    GridSpec s;
    auto read = [&](const char* key, double& field) {
        if (doc[key]) {
            field = doc[key].as<double>();
        }
    };
    read("x_min", s.x_min);
    read("x_max", s.x_max);
    read("y_min", s.y_min);
    read("y_max", s.y_max);
    read("k", s.k);
    read("step", s.step);
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    return s;
}

}  // namespace langact
