#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "langact/dreaming_eval.hpp"
#include "langact/synth_world.hpp"
#include "brute_scorer.hpp"

using namespace langact;
using oracle::random_prediction;
namespace brute = oracle::brute;

namespace {

// Speed waypoints along x with the given per-step speeds.
std::vector<Waypoint> from_speeds(const std::vector<double>& v, double dt) {
    std::vector<Waypoint> w{{0.0, 0.0}};
    for (double s : v) w.push_back({w.back().x + s * dt, 0.0});
    return w;
}

const std::vector<Sample>& dataset() {
    static const auto d = generate_dataset(120, uniform_mix(), 31, GridSpec{});
    return d;
}

}  // namespace

TEST_CASE("speeds and slope closed forms") {
    std::vector<Waypoint> line;
    for (int i = 0; i < 10; ++i) line.push_back({double(i), 0.0});
    for (double v : speeds_from_waypoints(line, 0.2)) CHECK(v == doctest::Approx(5.0));
    const std::vector<Waypoint> same{{1, 1}, {1, 1}};
    CHECK(speeds_from_waypoints(same, 0.2)[0] == 0.0);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<Waypoint> walk{{0, 0}};
    for (int i = 0; i < 30; ++i) walk.push_back({walk.back().x + nd(rng), walk.back().y + nd(rng)});
    const auto vs = speeds_from_waypoints(walk, 0.5);
    const auto bv = brute::speeds(walk, 0.5);
    for (std::size_t i = 0; i < vs.size(); ++i) CHECK(vs[i] == doctest::Approx(bv[i]).epsilon(1e-14));

    const std::vector<double> lin{2.0, 2.5, 3.0, 3.5};
    CHECK(regression_slope(lin, 0.2) == doctest::Approx(2.5).epsilon(1e-12));
    const std::vector<double> rev{3.5, 3.0, 2.5, 2.0};
    CHECK(regression_slope(rev, 0.2) == doctest::Approx(-2.5).epsilon(1e-12));
    const std::vector<double> flat(7, 4.2);
    CHECK(std::abs(regression_slope(flat, 0.2)) < 1e-12);
    CHECK_THROWS(regression_slope(std::vector<double>{1.0}, 0.2));
}

TEST_CASE("ade against direct summation") {
    std::vector<Waypoint> a, b;
    for (int i = 0; i < 20; ++i) a.push_back({double(i), 0.0}), b.push_back({double(i), 1.0});
    CHECK(ade(a, a) == 0.0);
    CHECK(ade(a, b) == doctest::Approx(1.0));
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(0.0, 3.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<Waypoint> p, q, longer;
        for (int i = 0; i < 20; ++i) p.push_back({nd(rng), nd(rng)}), q.push_back({nd(rng), nd(rng)});
        for (int i = 0; i < 33; ++i) longer.push_back({i * 0.7 + nd(rng) * 0.1, nd(rng) * 0.1});
        CHECK(ade(p, q) == doctest::Approx(brute::ade(p, q)).epsilon(1e-12));
        CHECK(ade(p, longer) == doctest::Approx(brute::ade(p, longer)).epsilon(1e-9));
        CHECK(ade(longer, p) == doctest::Approx(ade(p, longer)).epsilon(1e-12));
    }
    const auto r = resample_by_arc_length(a, 5);
    CHECK(r.front().x == 0.0);
    CHECK(r.back().x == doctest::Approx(19.0));
    CHECK(r[2].x == doctest::Approx(9.5));
}

TEST_CASE("dreamer trajectory always succeeds") {
    std::array<int, 6> seen{};
    for (const auto& s : dataset()) {
        CHECK(evaluate_sample(dreamer_as_prediction(s), s).success);
        ++seen[static_cast<int>(s.cls)];
    }
    for (int n : seen) CHECK(n == 20);
}

TEST_CASE("agrees with brute-force scorer on 1000 random cases") {
    std::mt19937_64 rng(2024);
    std::array<int, 6> pass{}, fail{};
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto& s = dataset()[static_cast<std::size_t>(t) % dataset().size()];
        const auto p = random_prediction(s, rng);
        const bool got = evaluate_sample(p, s).success;
        if (got != brute::score(p, s, 0.2)) ++mismatches;
        (got ? pass : fail)[static_cast<int>(s.cls)]++;
    }
    CHECK(mismatches == 0);
    // both outcomes exercised in every class
    for (int c = 0; c < 6; ++c) {
        CAPTURE(c);
        CHECK(pass[c] > 0);
        CHECK(fail[c] > 0);
    }
}

TEST_CASE("verdicts are invariant to a common translation") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> off(-10.0, 10.0);
    int flips = 0;
    for (int t = 0; t < 600; ++t) {
        Sample s = dataset()[static_cast<std::size_t>(t) % dataset().size()];
        auto p = random_prediction(s, rng);
        const bool before = evaluate_sample(p, s).success;
        const double dx = off(rng), dy = off(rng);
        for (auto* v : {&s.dreamer_path, &s.dreamer_speed_wps, &s.expert_path, &s.expert_speed_wps, &p.path, &p.speed_wps})
            for (auto& w : *v) w.x += dx, w.y += dy;
        flips += evaluate_sample(p, s).success != before;
    }
    CHECK(flips == 0);
}

TEST_CASE("stop rule") {
    Sample s;
    for (const auto& d : dataset())
        if (d.cls == InstructionClass::kStop) s = d;
    Prediction p;
    p.path = s.dreamer_path;
    p.speed_wps = from_speeds(std::vector<double>(9, 5.0), 0.2);
    CHECK_FALSE(evaluate_sample(p, s).success);
    // last step shorter than 0.1 m/s * dt
    auto v = std::vector<double>(9, 5.0);
    v.back() = 0.099;
    p.speed_wps = from_speeds(v, 0.2);
    CHECK(evaluate_sample(p, s).success);
    // exact tie: 0.05 m over dt = 0.5 s is exactly 0.1 m/s
    EvalParams half;
    half.dt = 0.5;
    p.speed_wps = {{0.0, 0.0}, {0.05, 0.0}};
    for (int i = 2; i < 10; ++i) p.speed_wps.push_back({double(i), 0.0});
    CHECK(speeds_from_waypoints(p.speed_wps, 0.5)[0] == 0.1);
    CHECK_FALSE(evaluate_sample(p, s, half).success);

    // decreasing every speed never turns a success into a failure
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 6.0), shrink(0.0, 1.0);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> sp(9);
        for (auto& x : sp) x = u(rng) * (shrink(rng) < 0.2 ? 0.01 : 1.0);
        p.speed_wps = from_speeds(sp, 0.2);
        const bool ok = evaluate_sample(p, s).success;
        for (auto& x : sp) x *= shrink(rng);
        p.speed_wps = from_speeds(sp, 0.2);
        if (ok) CHECK(evaluate_sample(p, s).success);
    }
}

TEST_CASE("lane change ties fail") {
    Sample s;
    for (const auto& d : dataset())
        if (d.cls == InstructionClass::kLaneChange) s = d;
    Prediction p = dreamer_as_prediction(s);
    // reflect onto the perpendicular bisector of the two endpoints
    const auto& d = s.dreamer_path.back();
    const auto& e = s.expert_path.back();
    p.path.back() = {(d.x + e.x) / 2 - (e.y - d.y) * 0.5, (d.y + e.y) / 2 + (e.x - d.x) * 0.5};
    const auto v = evaluate_sample(p, s);
    const double to_d = std::hypot(p.path.back().x - d.x, p.path.back().y - d.y);
    const double to_e = std::hypot(p.path.back().x - e.x, p.path.back().y - e.y);
    if (to_d == to_e) CHECK_FALSE(v.success);
    // exact midpoint is equidistant in floating point for axis-symmetric values
    Sample t = s;
    t.dreamer_path.back() = {20.0, 3.5};
    t.expert_path.back() = {20.0, -3.5};
    p.path.back() = {17.0, 0.0};
    CHECK_FALSE(evaluate_sample(p, t).success);
    p.path.back() = {17.0, 1e-9};
    CHECK(evaluate_sample(p, t).success);
}

TEST_CASE("dataset report, empty classes and hand count") {
    std::vector<Sample> ss(dataset().begin(), dataset().begin() + 20);
    std::vector<Prediction> ps;
    std::mt19937_64 rng(1);
    std::array<int, 6> n{}, ok{};
    for (const auto& s : ss) {
        ps.push_back(random_prediction(s, rng));
        ++n[int(s.cls)];
        ok[int(s.cls)] += brute::score(ps.back(), s, 0.2);
    }
    const auto rep = evaluate_dataset(ps, ss);
    double sum = 0;
    int k = 0;
    for (int c = 0; c < 6; ++c) {
        CHECK(rep.classes[c].n == n[c]);
        CHECK(rep.classes[c].successes == ok[c]);
        if (n[c]) sum += double(ok[c]) / n[c], ++k;
    }
    REQUIRE(rep.mean());
    CHECK(*rep.mean() == doctest::Approx(sum / k));

    std::vector<Sample> only;
    std::vector<Prediction> op;
    for (const auto& s : dataset())
        if (s.cls == InstructionClass::kStop) only.push_back(s), op.push_back(dreamer_as_prediction(s));
    const auto r2 = evaluate_dataset(op, only);
    CHECK(*r2.mean() == 1.0);
    CHECK_FALSE(r2.classes[0].rate().has_value());
    CHECK(r2.to_csv().find("N/A") != std::string::npos);
    CHECK(r2.to_csv().rfind("class,n,successes,rate", 0) == 0);

    Prediction bad;
    bad.path.resize(19);
    bad.speed_wps.resize(10);
    CHECK_THROWS_AS(evaluate_sample(bad, ss[0]), std::invalid_argument);

    const auto path = (std::filesystem::temp_directory_path() / "langact_pred_test.jsonl").string();
    write_predictions(path, ss, ps);
    const auto back = read_predictions(path);
    REQUIRE(back.size() == ps.size());
    CHECK(evaluate_dataset(back, ss).to_csv() == rep.to_csv());
    std::filesystem::remove(path);
}
