#include "langact/plot.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace langact {

namespace {

struct View {
    double x_lo, x_hi, y_lo, y_hi, s;
    // Forward (x) points up the page, left (+y) points left.
    double px(double y) const { return (y_hi - y) * s; }
    double py(double x) const { return (x_hi - x) * s; }
    double width() const { return (y_hi - y_lo) * s; }
    double height() const { return (x_hi - x_lo) * s; }
};

void polyline(std::ostringstream& os, const View& v, const std::vector<Waypoint>& pts, const char* color,
              double width, const char* dash = nullptr, bool from_origin = true) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << '"';
    if (dash) os << " stroke-dasharray=\"" << dash << '"';
    os << " points=\"";
    if (from_origin) os << v.px(0.0) << ',' << v.py(0.0) << ' ';
    for (const auto& p : pts) os << v.px(p.y) << ',' << v.py(p.x) << ' ';
    os << "\"/>\n";
}

void dots(std::ostringstream& os, const View& v, const std::vector<Waypoint>& pts, const char* color, double r) {
    for (const auto& p : pts) {
        os << "<circle cx=\"" << v.px(p.y) << "\" cy=\"" << v.py(p.x) << "\" r=\"" << r << "\" fill=\"" << color
           << "\"/>\n";
    }
}

}  // namespace

std::string plot_sample_svg(const Sample& s, const std::optional<Prediction>& pred, const GridSpec& spec,
                            const PlotOptions& opt) {
    double x_lo = 0.0, x_hi = 5.0, y_lo = -5.0, y_hi = 5.0;
    auto grow = [&](const Waypoint& p) {
        x_lo = std::min(x_lo, p.x);
        x_hi = std::max(x_hi, p.x);
        y_lo = std::min(y_lo, p.y);
        y_hi = std::max(y_hi, p.y);
    };
    for (const auto* t : {&s.expert_path, &s.dreamer_path}) for (const auto& p : *t) grow(p);
    for (const auto& o : s.scene.objects) grow({o.x, o.y});
    if (pred) for (const auto& p : pred->path) grow(p);
    const double m = opt.margin_m;
    View v{std::max(spec.x_min, x_lo - m), std::min(spec.x_max, x_hi + m), std::max(spec.y_min, y_lo - m),
           std::min(spec.y_max, y_hi + m), opt.px_per_m};

    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << v.width() << "\" height=\"" << v.height() + 24
       << "\" viewBox=\"0 0 " << v.width() << ' ' << v.height() + 24 << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (opt.grid_lines) {
        const GridSize gs = grid_size(spec);
        os << "<g stroke=\"#e4e4e4\" stroke-width=\"0.5\">\n";
        for (int i = 0; i <= gs.n_x; ++i) {
            const double x = i < gs.n_x ? cell_extent_x(i, spec).lo : cell_extent_x(gs.n_x - 1, spec).hi;
            if (x < v.x_lo || x > v.x_hi) continue;
            os << "<line x1=\"0\" x2=\"" << v.width() << "\" y1=\"" << v.py(x) << "\" y2=\"" << v.py(x) << "\"/>\n";
        }
        for (int j = 0; j <= gs.n_y; ++j) {
            const double y = j < gs.n_y ? cell_extent_y(j, spec).lo : cell_extent_y(gs.n_y - 1, spec).hi;
            if (y < v.y_lo || y > v.y_hi) continue;
            os << "<line y1=\"0\" y2=\"" << v.height() << "\" x1=\"" << v.px(y) << "\" x2=\"" << v.px(y) << "\"/>\n";
        }
        os << "</g>\n";
    }
    for (const auto& lane : s.scene.lanes) polyline(os, v, lane, "#b0b0b0", 2.0, "6,4", false);
    for (const auto& o : s.scene.objects) {
        os << "<rect x=\"" << v.px(o.y) - 6 << "\" y=\"" << v.py(o.x) - 6
           << "\" width=\"12\" height=\"12\" fill=\"#d9534f\"/>\n";
    }
    if (s.scene.target_point) dots(os, v, {*s.scene.target_point}, "#f0ad4e", 5.0);
    polyline(os, v, s.expert_path, "#5b9bd5", 2.0);
    polyline(os, v, s.dreamer_path, "#2ca02c", 2.5);
    dots(os, v, s.dreamer_speed_wps, "#2ca02c", 2.5);
    if (pred) {
        polyline(os, v, pred->path, "#9467bd", 2.0, "4,3");
        dots(os, v, pred->speed_wps, "#9467bd", 2.5);
    }
    os << "<polygon points=\"" << v.px(0) << ',' << v.py(0) - 8 << ' ' << v.px(0) - 5 << ',' << v.py(0) + 4 << ' '
       << v.px(0) + 5 << ',' << v.py(0) + 4 << "\" fill=\"black\"/>\n";
    std::string caption = s.instruction;
    for (char& c : caption) {
        if (c == '<' || c == '>' || c == '&') c = ' ';
    }
    os << "<text x=\"4\" y=\"" << v.height() + 17 << "\" font-family=\"sans-serif\" font-size=\"12\">"
       << class_name(s.cls) << ": " << caption
       << " (blue expert, green dreamer" << (pred ? ", purple prediction" : "") << ")</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace langact
