#include "doctest.h"

#include <cmath>
#include <map>
#include <random>

#include "langact/errors.hpp"
#include "langact/soft_label.hpp"

using namespace langact;

namespace {

// Direct evaluation of the truncated Gaussian over all cells, no sparsity.
std::map<ActionTokenId, double> dense_oracle(ActionTokenId c, double sigma, int radius, const GridSpec& g) {
    const auto n = grid_size(g);
    const auto cc = cell_of(c, g);
    std::map<ActionTokenId, double> q;
    double z = 0.0;
    for (int i = 0; i < n.n_x; ++i) {
        for (int j = 0; j < n.n_y; ++j) {
            const double dx = i - cc.i_x, dy = j - cc.i_y;
            if (dx * dx + dy * dy > double(radius) * radius) continue;
            const double w = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            q[i * n.n_y + j] = w;
            z += w;
        }
    }
    for (auto& [id, w] : q) w /= z;
    return q;
}

double logsumexp(const std::vector<double>& v) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace

TEST_CASE("neighbor ratio and near-delta limit") {
    const GridSpec g;
    const ActionTokenId c = token_of({28, 50}, g);
    const auto q = soft_target(c, {}, g);
    const double ratio = q.prob(c) / q.prob(token_of({29, 50}, g));
    CHECK(ratio == doctest::Approx(std::exp(1.0 / (2 * 1.2 * 1.2))).epsilon(1e-12));
    CHECK(ratio == doctest::Approx(1.4152).epsilon(1e-4));
    CHECK(soft_target(c, {0.01, 10}, g).prob(c) >= 1 - 1e-6);
    const auto one = soft_target(c, {1.2, 0}, g);
    CHECK(one.entries.size() == 1);
    CHECK(one.prob(c) == 1.0);
}

TEST_CASE("matches dense oracle for interior, edge and corner centers") {
    const GridSpec g;
    for (ActionTokenId c : {token_of({28, 50}, g), token_of({0, 0}, g), token_of({55, 100}, g),
                            token_of({3, 97}, g), token_of({55, 40}, g)}) {
        const auto q = soft_target(c, {}, g);
        const auto o = dense_oracle(c, 1.2, 10, g);
        REQUIRE(q.entries.size() == o.size());
        for (const auto& e : q.entries) CHECK(e.prob == doctest::Approx(o.at(e.id)).epsilon(1e-12));
    }
}

TEST_CASE("normalization, mode and radial monotonicity over every center") {
    const GridSpec g;
    const SoftTargetTable table({}, g);
    CHECK(table.size() == 5656);
    for (ActionTokenId c = 0; c < 5656; ++c) {
        const auto& q = table[c];
        double sum = 0.0, best = -1.0;
        ActionTokenId arg = -1;
        ActionTokenId prev = -1;
        const auto cc = cell_of(c, g);
        std::map<int, double> by_d2;
        bool ok = true;
        for (const auto& e : q.entries) {
            ok = ok && e.prob >= 0.0 && e.id > prev;
            prev = e.id;
            sum += e.prob;
            if (e.prob > best) best = e.prob, arg = e.id;
            const auto ec = cell_of(e.id, g);
            const int d2 = (ec.i_x - cc.i_x) * (ec.i_x - cc.i_x) + (ec.i_y - cc.i_y) * (ec.i_y - cc.i_y);
            ok = ok && d2 <= 100;
            auto [it, fresh] = by_d2.emplace(d2, e.prob);
            if (!fresh) ok = ok && std::abs(it->second - e.prob) < 1e-15;
        }
        double last = 2.0;
        for (const auto& [d2, p] : by_d2) {
            ok = ok && p < last;
            last = p;
        }
        if (!ok || std::abs(sum - 1.0) > 1e-9 || arg != c) {
            FAIL_CHECK("center " << c);
        }
    }
}

TEST_CASE("generation loss closed forms") {
    const GridSpec g;
    const int K = 5656;
    const auto q = soft_target(token_of({20, 40}, g), {}, g);
    std::vector<double> uniform(K, 0.3);
    CHECK(generation_loss(uniform, q) == doctest::Approx(std::log(5656.0)).epsilon(1e-12));
    CHECK(std::log(5656.0) == doctest::Approx(8.6405).epsilon(1e-4));

    // logits = log q on the support, -inf elsewhere approximated by a large gap
    std::vector<double> exact(K, -1e4);
    for (const auto& e : q.entries) exact[e.id] = std::log(e.prob);
    CHECK(generation_loss(exact, q) == doctest::Approx(entropy(q)).epsilon(1e-12));

    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 2.0);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> l(K);
        for (auto& x : l) x = nd(rng);
        CHECK(generation_loss(l, q) >= entropy(q) - 1e-12);
    }

    const ActionTokenId gt = 777;
    const auto hot = soft_target(gt, {1.2, 0}, g);
    for (double m : {0.0, 1.0, 5.0, 12.5}) {
        std::vector<double> l(K, 0.0);
        l[gt] = m;
        CHECK(generation_loss(l, hot) == doctest::Approx(std::log1p((K - 1) * std::exp(-m))).epsilon(1e-12));
    }
    std::vector<double> bad(K, 0.0);
    bad[5] = NAN;
    CHECK_THROWS_AS(generation_loss(bad, q), NumericError);
}

TEST_CASE("gradient identity against central differences") {
    const GridSpec g;
    const int K = 5656;
    const auto q = soft_target(token_of({30, 55}, g), {}, g);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> l(K);
    for (auto& x : l) x = nd(rng);
    const auto grad = generation_loss_grad(l, q);

    // softmax - q directly
    const double lse = logsumexp(l);
    for (int a = 0; a < K; ++a) CHECK(grad[a] == doctest::Approx(std::exp(l[a] - lse) - q.prob(a)).epsilon(1e-12));

    std::vector<int> probe;
    for (const auto& e : q.entries) probe.push_back(e.id);
    std::uniform_int_distribution<int> ui(0, K - 1);
    for (int i = 0; i < 60; ++i) probe.push_back(ui(rng));
    const double h = 1e-5;
    double worst = 0.0;
    for (int a : probe) {
        auto lp = l, lm = l;
        lp[a] += h;
        lm[a] -= h;
        const double num = (generation_loss(lp, q) - generation_loss(lm, q)) / (2 * h);
        const double rel = std::abs(num - grad[a]) / std::max({std::abs(num), std::abs(grad[a]), 1e-3});
        worst = std::max(worst, rel);
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS((SoftTargetParams{0.0, 10}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SoftTargetParams{1.0, -1}.validate()), std::invalid_argument);
    CHECK_NOTHROW((SoftTargetParams{1.0, 0}.validate()));
}
