#include "langact/dreaming_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "langact/errors.hpp"

namespace langact {

namespace {

double dist(const Waypoint& a, const Waypoint& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double mean(std::span<const double> v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

}  // namespace

std::vector<double> speeds_from_waypoints(std::span<const Waypoint> wps, double dt) {
    if (wps.size() < 2) {
        throw std::invalid_argument("speeds_from_waypoints: need at least two waypoints");
    }
    std::vector<double> out;
    out.reserve(wps.size() - 1);
    for (std::size_t i = 0; i + 1 < wps.size(); ++i) {
        out.push_back(dist(wps[i + 1], wps[i]) / dt);
    }
    return out;
}

double regression_slope(std::span<const double> speeds, double dt) {
    if (speeds.size() < 2) {
        throw std::invalid_argument("regression_slope: need at least two speeds");
    }
    const auto n = static_cast<double>(speeds.size());
    const double t_mean = dt * (n - 1.0) / 2.0;
    const double v_mean = mean(speeds);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < speeds.size(); ++i) {
        const double dt_i = dt * static_cast<double>(i) - t_mean;
        sxy += dt_i * (speeds[i] - v_mean);
        sxx += dt_i * dt_i;
    }
    return sxy / sxx;
}

std::vector<Waypoint> resample_by_arc_length(std::span<const Waypoint> wps, std::size_t count) {
    if (wps.empty() || count == 0) {
        throw std::invalid_argument("resample_by_arc_length: empty input");
    }
    if (count == 1 || wps.size() == 1) {
        return std::vector<Waypoint>(count, wps.front());
    }
    std::vector<double> s(wps.size(), 0.0);
    for (std::size_t i = 1; i < wps.size(); ++i) {
        s[i] = s[i - 1] + dist(wps[i], wps[i - 1]);
    }
    const double total = s.back();
    std::vector<Waypoint> out;
    out.reserve(count);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double target = total * static_cast<double>(k) / static_cast<double>(count - 1);
        while (seg + 2 < wps.size() && s[seg + 1] < target) {
            ++seg;
        }
        const double len = s[seg + 1] - s[seg];
        const double f = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
        out.push_back({wps[seg].x + f * (wps[seg + 1].x - wps[seg].x),
                       wps[seg].y + f * (wps[seg + 1].y - wps[seg].y)});
    }
    return out;
}

double ade(std::span<const Waypoint> a, std::span<const Waypoint> b) {
    if (a.empty() || b.empty()) {
        throw std::invalid_argument("ade: empty trajectory");
    }
    std::vector<Waypoint> ra(a.begin(), a.end());
    std::vector<Waypoint> rb(b.begin(), b.end());
    if (ra.size() > rb.size()) {
        ra = resample_by_arc_length(a, rb.size());
    } else if (rb.size() > ra.size()) {
        rb = resample_by_arc_length(b, ra.size());
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sum += dist(ra[i], rb[i]);
    }
    return sum / static_cast<double>(ra.size());
}

Verdict evaluate_sample(const Prediction& pred, const Sample& sample, const EvalParams& params) {
    if (pred.path.size() != 20 || pred.speed_wps.size() != 10) {
        throw std::invalid_argument("evaluate_sample: prediction must have 20 path and 10 speed waypoints");
    }
    const auto pred_speeds = speeds_from_waypoints(pred.speed_wps, params.dt);
    const auto gt_speeds = speeds_from_waypoints(sample.dreamer_speed_wps, params.dt);
    Verdict v;
    std::ostringstream diag;

    switch (sample.cls) {
    case InstructionClass::kFaster:
    case InstructionClass::kSlower: {
        const double s = regression_slope(pred_speeds, params.dt);
        const double v0 = gt_speeds.front();
        const double thresh = params.faster_slope_frac * v0;
        v.success = sample.cls == InstructionClass::kFaster ? s > thresh : s < -thresh;
        diag << "slope=" << fmt(s) << " start_speed=" << fmt(v0) << " threshold=" << fmt(thresh);
        break;
    }
    case InstructionClass::kTargetSpeed: {
        const double pred_final = pred_speeds.back();
        const double gt_final = gt_speeds.back();
        const double band = params.target_band;
        const bool near_target = sample.target_speed.has_value() &&
                                 std::abs(pred_final - *sample.target_speed) < band * *sample.target_speed;
        const bool near_gt = std::abs(pred_final - gt_final) < band * gt_final;
        v.success = near_target || near_gt;
        diag << "pred_final=" << fmt(pred_final) << " target="
             << (sample.target_speed ? fmt(*sample.target_speed) : std::string("none"))
             << " gt_final=" << fmt(gt_final);
        break;
    }
    case InstructionClass::kLaneChange: {
        const double to_dreamer = dist(pred.path.back(), sample.dreamer_path.back());
        const double to_expert = dist(pred.path.back(), sample.expert_path.back());
        v.success = to_dreamer < to_expert;
        diag << "final_to_dreamer=" << fmt(to_dreamer) << " final_to_expert=" << fmt(to_expert);
        break;
    }
    case InstructionClass::kObject: {
        const double gate = ade(sample.expert_path, sample.dreamer_path);
        const double to_dreamer = ade(pred.path, sample.dreamer_path);
        if (gate > params.object_ade_gate) {
            const double to_expert = ade(pred.path, sample.expert_path);
            v.success = to_expert > to_dreamer;
            diag << "path_rule expert_vs_dreamer=" << fmt(gate) << " pred2expert=" << fmt(to_expert)
                 << " pred2dreamer=" << fmt(to_dreamer);
        } else {
            const double pm = mean(pred_speeds);
            const double gm = mean(gt_speeds);
            v.success = to_dreamer < params.object_ade_gate &&
                        std::abs(pm - gm) < params.object_speed_band * gm;
            diag << "speed_rule pred2dreamer=" << fmt(to_dreamer) << " pred_mean_speed=" << fmt(pm)
                 << " gt_mean_speed=" << fmt(gm);
        }
        break;
    }
    case InstructionClass::kStop: {
        const double vmin = *std::min_element(pred_speeds.begin(), pred_speeds.end());
        v.success = vmin < params.stop_speed;
        diag << "min_speed=" << fmt(vmin);
        break;
    }
    default:
        throw std::invalid_argument("evaluate_sample: unknown instruction class");
    }
    v.diagnostics = diag.str();
    return v;
}

std::optional<double> ClassRate::rate() const {
    if (n == 0) {
        return std::nullopt;
    }
    return static_cast<double>(successes) / static_cast<double>(n);
}

std::optional<double> DreamingReport::mean() const {
    double sum = 0.0;
    int k = 0;
    for (const auto& c : classes) {
        if (auto r = c.rate()) {
            sum += *r;
            ++k;
        }
    }
    if (k == 0) {
        return std::nullopt;
    }
    return sum / k;
}

std::string DreamingReport::to_csv() const {
    std::ostringstream os;
    os << "class,n,successes,rate\n";
    for (const auto& c : classes) {
        os << class_name(c.cls) << ',' << c.n << ',' << c.successes << ',';
        if (auto r = c.rate()) {
            os << std::fixed << std::setprecision(4) << *r;
        } else {
            os << "N/A";
        }
        os << '\n';
    }
    os << "Mean,,,";
    if (auto m = mean()) {
        os << std::fixed << std::setprecision(4) << *m;
    } else {
        os << "N/A";
    }
    os << '\n';
    return os.str();
}

std::string DreamingReport::pretty() const {
    std::ostringstream os;
    os << std::left << std::setw(12) << "class" << std::right << std::setw(6) << "n" << std::setw(10)
       << "success" << std::setw(10) << "rate" << '\n';
    auto pct = [](std::optional<double> r) {
        if (!r) {
            return std::string("N/A");
        }
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << 100.0 * *r << '%';
        return s.str();
    };
    for (const auto& c : classes) {
        os << std::left << std::setw(12) << class_name(c.cls) << std::right << std::setw(6) << c.n
           << std::setw(10) << c.successes << std::setw(10) << pct(c.rate()) << '\n';
    }
    os << std::left << std::setw(28) << "Mean" << std::right << std::setw(10) << pct(mean()) << '\n';
    return os.str();
}

DreamingReport evaluate_dataset(std::span<const Prediction> preds, std::span<const Sample> samples,
                                const EvalParams& params) {
    if (preds.size() != samples.size()) {
        throw std::invalid_argument("evaluate_dataset: prediction and sample counts differ");
    }
    DreamingReport rep;
    for (std::size_t i = 0; i < rep.classes.size(); ++i) {
        rep.classes[i].cls = kAllClasses[i];
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto& c = rep.classes[static_cast<std::size_t>(samples[i].cls)];
        ++c.n;
        if (evaluate_sample(preds[i], samples[i], params).success) {
            ++c.successes;
        }
    }
    return rep;
}

Prediction dreamer_as_prediction(const Sample& s) { return {s.dreamer_path, s.dreamer_speed_wps}; }

std::vector<Prediction> read_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open predictions '" + path + "'");
    }
    std::vector<Prediction> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            out.push_back({waypoints_from_json(j.at("pred_path")),
                           waypoints_from_json(j.at("pred_speed_wps"))});
        } catch (const nlohmann::json::exception& e) {
            throw DataError("malformed prediction record: " + std::string(e.what()));
        }
    }
    return out;
}

void write_predictions(const std::string& path, std::span<const Sample> samples,
                       std::span<const Prediction> preds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write predictions '" + path + "'");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto j = to_json(samples[i]);
        j["pred_path"] = waypoints_to_json(preds[i].path);
        j["pred_speed_wps"] = waypoints_to_json(preds[i].speed_wps);
        out << j.dump() << '\n';
    }
}

}  // namespace langact
