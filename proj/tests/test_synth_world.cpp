#include "doctest.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "langact/errors.hpp"
#include "langact/synth_world.hpp"

using namespace langact;

TEST_CASE("bicycle step matches the closed form") {
    // Straight line, no steering: x advances by v*dt, speed by a*dt.
    EgoState s{1.0, 2.0, 0.0, 4.0};
    auto n = bicycle_step(s, 1.0, 0.0, 0.1, 2.9);
    CHECK(n.x == doctest::Approx(1.4));
    CHECK(n.y == doctest::Approx(2.0));
    CHECK(n.heading == doctest::Approx(0.0));
    CHECK(n.speed == doctest::Approx(4.1));

    // Constant steer: yaw rate v/L tan(delta).
    s = {0.0, 0.0, 0.3, 5.0};
    n = bicycle_step(s, 0.0, 0.2, 0.05, 2.9);
    CHECK(n.x == doctest::Approx(5.0 * std::cos(0.3) * 0.05));
    CHECK(n.y == doctest::Approx(5.0 * std::sin(0.3) * 0.05));
    CHECK(n.heading == doctest::Approx(0.3 + 5.0 / 2.9 * std::tan(0.2) * 0.05));

    // Speed never goes negative.
    s = {0.0, 0.0, 0.0, 0.1};
    CHECK(bicycle_step(s, -3.0, 0.0, 0.1, 2.9).speed == 0.0);
}

TEST_CASE("cross-track sign: reference to the left is positive") {
    std::vector<Waypoint> ref{{0.0, 1.0}, {50.0, 1.0}};
    CHECK(cross_track_error({5.0, 0.0, 0.0, 3.0}, ref) == doctest::Approx(1.0));
    CHECK(cross_track_error({5.0, 2.5, 0.0, 3.0}, ref) == doctest::Approx(-1.5));
}

TEST_CASE("PID converges from a 2 m lateral offset") {
    SimConfig cfg;
    PidTracker pid(cfg.gains, cfg.vehicle, cfg.dt);
    std::vector<Waypoint> ref;
    for (int i = 0; i <= 200; ++i) ref.push_back({0.5 * i, 0.0});
    EgoState s{0.0, 2.0, 0.0, 6.0};
    const int steps = static_cast<int>(6.0 / cfg.dt);
    for (int k = 0; k < steps; ++k) {
        auto cmd = pid.track(s, ref, 6.0);
        CHECK(std::abs(cmd.steer) <= cfg.vehicle.steer_max);
        CHECK(std::abs(cmd.accel) <= cfg.vehicle.a_max);
        s = bicycle_step(s, cmd.accel, cmd.steer, cfg.dt, cfg.vehicle.wheelbase);
    }
    CHECK(std::abs(s.y) < 0.2);
    CHECK(std::abs(s.speed - 6.0) < 0.1);
}

TEST_CASE("PID speed loop reaches a setpoint") {
    SimConfig cfg;
    PidTracker pid(cfg.gains, cfg.vehicle, cfg.dt);
    std::vector<Waypoint> ref{{0.0, 0.0}, {500.0, 0.0}};
    EgoState s{0.0, 0.0, 0.0, 2.0};
    for (int k = 0; k < 200; ++k) {
        auto cmd = pid.track(s, ref, 8.0);
        s = bicycle_step(s, cmd.accel, cmd.steer, cfg.dt, cfg.vehicle.wheelbase);
    }
    CHECK(s.speed == doctest::Approx(8.0).epsilon(0.02));
}

TEST_CASE("snapped path length lands on a cell center") {
    GridSpec g;
    SimConfig cfg;
    const double L = snapped_path_length(cfg, g);
    CHECK(std::abs(L - 20.0) < 1.0);
    const auto id = tokenize_waypoint({L, 0.0}, g);
    CHECK(detokenize(id, g).x == L);
}

TEST_CASE("every class generates valid, self-consistent samples") {
    GridSpec g;
    SimConfig cfg;
    const double L = snapped_path_length(cfg, g);
    for (auto cls : kAllClasses) {
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            const Sample s = generate_scenario(cls, seed, g, cfg);
            CAPTURE(class_name(cls));
            CAPTURE(seed);
            CHECK(s.cls == cls);
            CHECK(s.seed == seed);
            REQUIRE(s.expert_path.size() == 20);
            REQUIRE(s.dreamer_path.size() == 20);
            REQUIRE(s.expert_speed_wps.size() == 10);
            REQUIRE(s.dreamer_speed_wps.size() == 10);
            CHECK(evaluate_sample(dreamer_as_prediction(s), s).success);
            // Path waypoints are arc-length spaced and end at L.
            double arc = std::hypot(s.dreamer_path[0].x, s.dreamer_path[0].y);
            for (std::size_t i = 1; i < 20; ++i) {
                arc += std::hypot(s.dreamer_path[i].x - s.dreamer_path[i - 1].x,
                                  s.dreamer_path[i].y - s.dreamer_path[i - 1].y);
            }
            CHECK(arc == doctest::Approx(L).epsilon(0.01));
            for (const auto& w : s.dreamer_path) {
                CHECK(w.x >= g.x_min);
                CHECK(w.x <= g.x_max);
            }
            CHECK(!s.instruction.empty());
            CHECK(s.target_speed.has_value() == (cls == InstructionClass::kTargetSpeed));
            if (cls == InstructionClass::kLaneChange) {
                CHECK(std::abs(s.dreamer_path.back().y - s.expert_path.back().y) > 1.0);
            }
        }
    }
}

TEST_CASE("generation is deterministic per seed") {
    GridSpec g;
    const auto a = generate_scenario(InstructionClass::kObject, 77, g);
    const auto b = generate_scenario(InstructionClass::kObject, 77, g);
    CHECK(to_json(a) == to_json(b));
    const auto c = generate_scenario(InstructionClass::kObject, 78, g);
    CHECK(to_json(a) != to_json(c));
}

TEST_CASE("straight scenes yield straight expert paths") {
    GridSpec g;
    SimConfig cfg;
    int straight = 0;
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const auto s = generate_scenario(InstructionClass::kFaster, seed, g, cfg);
        const auto& lane = s.scene.lanes.empty() ? std::vector<Waypoint>{} : s.scene.lanes.front();
        bool is_straight = !lane.empty();
        for (const auto& w : lane) is_straight = is_straight && w.y == lane.front().y;
        if (!is_straight) continue;
        ++straight;
        for (const auto& w : s.expert_path) CHECK(std::abs(w.y) < 1e-9);
    }
    CHECK(straight > 5);
}

TEST_CASE("mix parsing and largest-remainder allocation") {
    const auto m = parse_mix("Faster=1,Stop=3");
    CHECK(m[0] == doctest::Approx(0.25));
    CHECK(m[5] == doctest::Approx(0.75));
    CHECK_THROWS_AS(parse_mix("Faster"), UsageError);
    CHECK_THROWS_AS(parse_mix("Flying=1"), UsageError);
    CHECK_THROWS_AS(parse_mix("Stop=0"), UsageError);
    CHECK_THROWS_AS(parse_mix("Stop=-1,Faster=2"), UsageError);

    auto c = allocate_counts(10, uniform_mix());
    int total = 0;
    for (int x : c) {
        CHECK((x == 1 || x == 2));
        total += x;
    }
    CHECK(total == 10);
    c = allocate_counts(7, m);
    CHECK(c[0] == 2);
    CHECK(c[5] == 5);
    CHECK(c[1] + c[2] + c[3] + c[4] == 0);
}

TEST_CASE("dataset build round-trips through JSONL") {
    GridSpec g;
    const auto path = (std::filesystem::temp_directory_path() / "langact_ds_test.jsonl").string();
    const auto summary = build_dataset(24, uniform_mix(), 5, path, g);
    CHECK(summary.n == 24);
    for (int k : summary.per_class) CHECK(k == 4);
    const auto back = read_samples(path);
    REQUIRE(back.size() == 24);
    const auto again = generate_dataset(24, uniform_mix(), 5, g);
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].instruction == again[i].instruction);
        CHECK(back[i].dreamer_path.back().x == doctest::Approx(again[i].dreamer_path.back().x));
    }
    std::filesystem::remove(path);
    CHECK(summary.mean_ego_speed > 3.0);
    CHECK(summary.mean_ego_speed < 9.0);
}

TEST_CASE("scene tokens are canonical and every instruction word is known") {
    GridSpec g;
    const auto vocab = instruction_vocabulary();
    const auto cb = Codebook::build(vocab, g);
    const auto ds = generate_dataset(60, uniform_mix(), 11, g);
    for (const auto& s : ds) {
        for (auto id : cb.encode_text(s.instruction)) CHECK(id != cb.unk_id());
        const auto v = scene_to_tokens(s.scene, cb);
        REQUIRE(v.size() % 2 == 0);
        for (std::size_t i = 0; i < v.size(); i += 2) {
            CHECK(cb.kind(v[i]) == TokenKind::kSpecial);
            CHECK(cb.kind(v[i + 1]) == TokenKind::kAction);
        }
        // Permuting the scene does not change the tokens.
        Scene p = s.scene;
        std::reverse(p.lanes.begin(), p.lanes.end());
        std::reverse(p.objects.begin(), p.objects.end());
        CHECK(scene_to_tokens(p, cb) == v);
    }
    CHECK(scene_to_tokens(Scene{}, cb).empty());
}
