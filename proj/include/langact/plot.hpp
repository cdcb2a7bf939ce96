#pragma once

// Static SVG of one sample: lanes, objects, expert/dreamer and an optional
// predicted trajectory, drawn top-down (x forward = up, y left = left).

#include <optional>
#include <string>

#include "langact/dreaming_eval.hpp"
#include "langact/grid_codec.hpp"

namespace langact {

struct PlotOptions {
    bool grid_lines = true;   // overlay log-grid cell boundaries
    double px_per_m = 14.0;
    double margin_m = 3.0;
};

std::string plot_sample_svg(const Sample& s, const std::optional<Prediction>& pred, const GridSpec& spec,
                            const PlotOptions& opt = {});

}  // namespace langact
