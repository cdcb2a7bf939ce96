#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "langact/errors.hpp"
#include "langact/grid_codec.hpp"

using namespace langact;

namespace {

// Independent oracle: signed log in long double and scan every cell.
long double T(long double z, long double k) { return (z < 0 ? -1 : 1) * std::log(1.0L + k * std::fabs(z)); }

int count_cells(long double lo, long double hi, long double k, long double step) {
    // Walk transformed-space cell boundaries until the range is covered.
    const long double a = T(lo, k), b = T(hi, k);
    int n = 0;
    while (a + n * step <= b + 1e-12L) ++n;
    return n;
}

int scan_index(long double z, long double lo, long double k, long double step, int n) {
    const long double t = T(z, k), a = T(lo, k);
    for (int i = 0; i < n; ++i) {
        if (t >= a + i * step && t < a + (i + 1) * step) return i;
    }
    return t < a ? 0 : n - 1;
}

}  // namespace

TEST_CASE("log transform values and inverse") {
    CHECK(log_transform(0.0, 5.0) == 0.0);
    CHECK(log_transform(50.0, 5.0) == doctest::Approx(std::log(251.0)).epsilon(1e-12));
    CHECK(log_transform(50.0, 5.0) == doctest::Approx(5.5255).epsilon(1e-4));
    CHECK(log_transform(-30.0, 5.0) == doctest::Approx(-5.0173).epsilon(1e-4));
    CHECK(log_transform(-30.0, 5.0) == doctest::Approx(-log_transform(30.0, 5.0)).epsilon(1e-15));
    CHECK(inverse_log_transform(0.0, 5.0) == 0.0);
    CHECK(inverse_log_transform(std::log(251.0), 5.0) == doctest::Approx(50.0).epsilon(1e-9));
    CHECK(inverse_log_transform(-std::log(26.0), 5.0) == doctest::Approx(-5.0).epsilon(1e-9));
    CHECK_THROWS_AS(log_transform(std::nan(""), 5.0), std::domain_error);
    CHECK_THROWS_AS(log_transform(INFINITY, 5.0), std::domain_error);
    CHECK_THROWS_AS(inverse_log_transform(std::nan(""), 5.0), std::domain_error);
    // Strictly increasing and odd.
    for (double z = -30.0; z < 30.0; z += 0.37) {
        CHECK(log_transform(z + 0.01, 5.0) > log_transform(z, 5.0));
        CHECK(log_transform(-z, 5.0) == doctest::Approx(-log_transform(z, 5.0)));
    }
}

TEST_CASE("grid sizes match published and oracle counts") {
    GridSpec g;
    CHECK(grid_size(g) == GridSize{56, 101, 5656});
    g.k = 10.0;
    CHECK(grid_size(g) == GridSize{63, 115, 7245});
    for (double k : {1.0, 2.0, 5.0, 10.0}) {
        for (double step : {0.05, 0.1, 0.2, 0.3}) {
            GridSpec s;
            s.k = k;
            s.step = step;
            const int nx = count_cells(s.x_min, s.x_max, k, step);
            const int ny = count_cells(s.y_min, s.y_max, k, step);
            CAPTURE(k);
            CAPTURE(step);
            CHECK(grid_size(s) == GridSize{nx, ny, nx * ny});
        }
    }
}

TEST_CASE("tokenize matches exhaustive cell scan") {
    const GridSpec g;
    CHECK(tokenize_waypoint({0.0, 0.0}, g) == 50);
    CHECK(tokenize_waypoint({10.0, -5.0}, g) == 3956);
    const auto c = cell_of(3956, g);
    CHECK(c.i_x == 39);
    CHECK(c.i_y == 17);

    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> ux(-5.0, 55.0), uy(-35.0, 35.0);
    for (int i = 0; i < 3000; ++i) {
        const Waypoint w{ux(rng), uy(rng)};
        const int ix = scan_index(w.x, g.x_min, g.k, g.step, 56);
        const int iy = scan_index(w.y, g.y_min, g.k, g.step, 101);
        CHECK(tokenize_waypoint(w, g) == ix * 101 + iy);
    }
}

TEST_CASE("detokenize returns clamped cell centers") {
    const GridSpec g;
    const auto w = detokenize(tokenize_waypoint({10.0, -5.0}, g), g);
    CHECK(w.x == doctest::Approx(10.19).epsilon(0.002));
    CHECK(w.y == doctest::Approx(-5.05).epsilon(0.002));
    CHECK(std::abs(log_transform(w.x, 5) - log_transform(10.0, 5)) <= 0.05 + 1e-12);
    CHECK(std::abs(log_transform(w.y, 5) - log_transform(-5.0, 5)) <= 0.05 + 1e-12);
    const auto o = detokenize(50, g);
    CHECK(std::abs(o.x) < 0.011);
    CHECK(std::abs(o.y) < 0.011);
    CHECK_THROWS_AS(detokenize(-1, g), std::out_of_range);
    CHECK_THROWS_AS(detokenize(5656, g), std::out_of_range);
    for (ActionTokenId id = 0; id < 5656; ++id) {
        const auto p = detokenize(id, g);
        CHECK(tokenize_waypoint(p, g) == id);
        CHECK(p.x >= g.x_min);
        CHECK(p.x <= g.x_max);
        CHECK(p.y >= g.y_min);
        CHECK(p.y <= g.y_max);
        CHECK(token_of(cell_of(id, g), g) == id);
    }
}

TEST_CASE("cell widths grow away from the origin") {
    const GridSpec g;
    double prev = 0.0;
    for (int i = 0; i < 55; ++i) {
        const auto e = cell_extent_x(i, g);
        CHECK(e.hi - e.lo >= prev - 1e-12);
        prev = e.hi - e.lo;
    }
    // Lateral: widths shrink toward y = 0 then grow again.
    for (int j = 51; j < 100; ++j) {
        const auto a = cell_extent_y(j, g), b = cell_extent_y(j + 1, g);
        CHECK(b.hi - b.lo >= a.hi - a.lo - 1e-12);
    }
}

TEST_CASE("lateral mirror symmetry") {
    // n_y cells of width step overhang the transformed y-range, so cells are not
    // centered on y = 0. Mirrored indices sum to n_y - 1 only when the point's
    // fractional cell offset f is <= frac(2 * T(y_max) / step); otherwise n_y - 2.
    const GridSpec g;
    const double c = 2.0 * log_transform(g.y_max, g.k) / g.step;
    const double c_frac = c - std::floor(c);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ux(0.0, 50.0), uy(0.0, 29.9);
    int exact = 0, total = 0;
    for (int i = 0; i < 2000; ++i) {
        const double x = ux(rng), y = uy(rng);
        const double u = (log_transform(y, g.k) - log_transform(g.y_min, g.k)) / g.step;
        const double f = u - std::floor(u);
        if (std::abs(f - c_frac) < 1e-6 || f < 1e-6) continue;
        const auto a = cell_of(tokenize_waypoint({x, y}, g), g);
        const auto b = cell_of(tokenize_waypoint({x, -y}, g), g);
        CHECK(a.i_y + b.i_y == (f <= c_frac ? 100 : 99));
        exact += (a.i_y + b.i_y == 100);
        ++total;
    }
    CHECK(total > 1900);
    CHECK(exact > 0);
    CHECK(exact < total);
}

TEST_CASE("out-of-range waypoints clamp") {
    const GridSpec g;
    CHECK(cell_of(tokenize_waypoint({-10.0, 0.0}, g), g).i_x == 0);
    CHECK(cell_of(tokenize_waypoint({500.0, 0.0}, g), g).i_x == 55);
    CHECK(cell_of(tokenize_waypoint({10.0, -99.0}, g), g).i_y == 0);
    CHECK(cell_of(tokenize_waypoint({10.0, 99.0}, g), g).i_y == 100);
}

TEST_CASE("grid spec validation, json and yaml") {
    GridSpec bad;
    bad.k = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = GridSpec{};
    bad.x_max = bad.x_min;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    GridSpec g;
    g.k = 10.0;
    CHECK(grid_spec_from_json(to_json(g)) == g);

    const auto path = (std::filesystem::temp_directory_path() / "langact_grid_test.yaml").string();
    std::ofstream(path) << "k: 10\nstep: 0.1\n";
    CHECK(grid_size(load_grid_spec(path)).k_action == 7245);
    std::ofstream(path) << "k: -1\n";
    CHECK_THROWS_AS(load_grid_spec(path), DataError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_grid_spec("/nonexistent/grid.yaml"), DataError);
}
