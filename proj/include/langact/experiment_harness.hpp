#pragma once

// Plan-driven ablations: train every variant under identical seeds, data and
// step budgets, then score each on held-out dreaming success.

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "langact/c2f_decoder.hpp"
#include "langact/dreaming_eval.hpp"
#include "langact/grid_codec.hpp"
#include "langact/model.hpp"
#include "langact/synth_world.hpp"
#include "langact/train.hpp"

namespace langact {

enum class DecodeMethod : std::uint8_t { kAutoregressive, kCoarseToFine };
std::string_view method_name(DecodeMethod m);
DecodeMethod parse_method(std::string_view s);  // "ar" | "c2f", throws UsageError
// c2f models decode coarse-to-fine, ar models autoregressively.
DecodeMethod default_method(TrainMode mode);

// Keys a variant may override. Anything else is rejected at load time.
struct Overrides {
    std::optional<double> lambda;
    std::optional<double> sigma;
    std::optional<int> radius;
    std::optional<double> k;
    std::optional<TrainMode> mode;

    nlohmann::json to_json() const;
};

struct Variant {
    std::string name;
    Overrides overrides;
};

struct ExperimentPlan {
    std::string name = "ablation";
    std::uint64_t data_seed = 7;
    int n_train = 5000;
    int n_heldout = 500;
    ClassMix mix = uniform_mix();
    GridSpec grid;
    SimConfig sim;
    ModelConfig model;  // vocabulary fields are filled per variant
    TrainConfig train;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    bool bench = false;
    int bench_trials = 20;
    std::vector<Variant> variants;

    // Throws UsageError for an invalid plan, DataError for an unreadable file.
    static ExperimentPlan load(const std::string& path);
    void validate() const;
};

// Model config, train config, grid and codebook for one variant and seed.
struct VariantSetup {
    GridSpec grid;
    ModelConfig model;
    TrainConfig train;
    Codebook codebook;
};
VariantSetup setup_variant(const ExperimentPlan& plan, const Variant& v, std::uint64_t seed,
                           const std::vector<std::string>& words);

// Decodes every sample; returns predictions in dataset order.
std::vector<Prediction> predict_dataset(const Decoder& dec, std::span<const Sample> samples, DecodeMethod method,
                                        int max_lane_points = 6);

struct SeedResult {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    DreamingReport report;
    double heldout_gen = 0.0;
    double heldout_und = 0.0;
    long long steps = 0;
    double train_seconds = 0.0;
    std::optional<double> ar_ms;
    std::optional<double> c2f_ms;

    std::optional<double> mean_success() const { return ok ? report.mean() : std::nullopt; }
};

struct VariantResult {
    Variant variant;
    std::vector<SeedResult> seeds;
    bool failed() const;
    // Median over successful seeds of the mean dreaming success.
    std::optional<double> median_success() const;
};

struct AblationReport {
    std::string name;
    std::vector<VariantResult> variants;

    std::string to_csv() const;
    std::string to_markdown() const;
};

using ProgressFn = std::function<void(const std::string&)>;

// Variants that diverge are marked failed; the report is still produced.
AblationReport run_ablation(const ExperimentPlan& plan, const ProgressFn& progress = {});

double median(std::vector<double> v);

}  // namespace langact
