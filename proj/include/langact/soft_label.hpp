#pragma once

#include <span>
#include <vector>

#include "langact/grid_codec.hpp"

namespace langact {

// sigma and radius are in integer cell units. radius == 0 gives a one-hot target.
struct SoftTargetParams {
    double sigma = 1.2;
    int radius = 10;

    void validate() const;
};

struct TargetEntry {
    ActionTokenId id = 0;
    double prob = 0.0;
};

// Sparse distribution over grid ids, entries sorted by id.
struct TargetDistribution {
    ActionTokenId center = 0;
    std::vector<TargetEntry> entries;

    double prob(ActionTokenId id) const;
};

// Truncated 2D Gaussian over cells within Euclidean cell distance <= radius of
// a_gt, renormalized over the in-grid support.
TargetDistribution soft_target(ActionTokenId a_gt, const SoftTargetParams& params,
                               const GridSpec& spec);

// -sum_a q(a) log softmax(logits)(a); logits span the action segment.
// Throws NumericError on non-finite logits.
double generation_loss(std::span<const double> logits, const TargetDistribution& q);

// d loss / d logits = softmax(logits) - q.
std::vector<double> generation_loss_grad(std::span<const double> logits,
                                         const TargetDistribution& q);

double entropy(const TargetDistribution& q);

// All K_action targets precomputed once and shared read-only.
class SoftTargetTable {
public:
    SoftTargetTable(const SoftTargetParams& params, const GridSpec& spec);

    const TargetDistribution& operator[](ActionTokenId a_gt) const {
        return table_.at(static_cast<std::size_t>(a_gt));
    }
    const SoftTargetParams& params() const { return params_; }
    std::size_t size() const { return table_.size(); }

private:
    SoftTargetParams params_;
    std::vector<TargetDistribution> table_;
};

}  // namespace langact
