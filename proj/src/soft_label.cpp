#include "langact/soft_label.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "langact/errors.hpp"

namespace langact {

void SoftTargetParams::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("soft target: sigma must be positive");
    }
    if (radius < 0) {
        throw std::invalid_argument("soft target: radius must be >= 0");
    }
}

double TargetDistribution::prob(ActionTokenId id) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), id,
                               [](const TargetEntry& e, ActionTokenId v) { return e.id < v; });
    return (it != entries.end() && it->id == id) ? it->prob : 0.0;
}

TargetDistribution soft_target(ActionTokenId a_gt, const SoftTargetParams& params,
                               const GridSpec& spec) {
    params.validate();
    const GridSize g = grid_size(spec);
    const CellIndex c = cell_of(a_gt, spec);
    const int r = params.radius;
    const double inv_two_var = 1.0 / (2.0 * params.sigma * params.sigma);

    TargetDistribution q;
    q.center = a_gt;
    double z = 0.0;
    // Row-major walk keeps entries sorted by id.
    for (int ix = std::max(0, c.i_x - r); ix <= std::min(g.n_x - 1, c.i_x + r); ++ix) {
        for (int iy = std::max(0, c.i_y - r); iy <= std::min(g.n_y - 1, c.i_y + r); ++iy) {
            const int dx = ix - c.i_x;
            const int dy = iy - c.i_y;
            const int d2 = dx * dx + dy * dy;
            if (d2 > r * r) {
                continue;
            }
            const double w = std::exp(-static_cast<double>(d2) * inv_two_var);
            q.entries.push_back({ix * g.n_y + iy, w});
            z += w;
        }
    }
    for (auto& e : q.entries) {
        e.prob /= z;
    }
    return q;
}

namespace {

double log_sum_exp(std::span<const double> logits) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : logits) {
        if (!std::isfinite(v)) {
            throw NumericError("generation loss: non-finite logit");
        }
        m = std::max(m, v);
    }
    double s = 0.0;
    for (double v : logits) {
        s += std::exp(v - m);
    }
    return m + std::log(s);
}

}  // namespace

double generation_loss(std::span<const double> logits, const TargetDistribution& q) {
    const double lse = log_sum_exp(logits);
    double loss = 0.0;
    for (const auto& e : q.entries) {
        loss -= e.prob * (logits[static_cast<std::size_t>(e.id)] - lse);
    }
    return loss;
}

std::vector<double> generation_loss_grad(std::span<const double> logits,
                                         const TargetDistribution& q) {
    const double lse = log_sum_exp(logits);
    std::vector<double> g(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        g[i] = std::exp(logits[i] - lse);
    }
    for (const auto& e : q.entries) {
        g[static_cast<std::size_t>(e.id)] -= e.prob;
    }
    return g;
}

double entropy(const TargetDistribution& q) {
    double h = 0.0;
    for (const auto& e : q.entries) {
        if (e.prob > 0.0) {
            h -= e.prob * std::log(e.prob);
        }
    }
    return h;
}

SoftTargetTable::SoftTargetTable(const SoftTargetParams& params, const GridSpec& spec)
    : params_(params) {
    const int k = grid_size(spec).k_action;
    table_.reserve(static_cast<std::size_t>(k));
    for (ActionTokenId id = 0; id < k; ++id) {
        table_.push_back(soft_target(id, params, spec));
    }
}

}  // namespace langact
