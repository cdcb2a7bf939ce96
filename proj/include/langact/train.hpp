#pragma once

// AdamW training of the transformer on encoded samples, plus checkpoints.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "langact/codebook.hpp"
#include "langact/model.hpp"
#include "langact/sample.hpp"
#include "langact/sequence_builder.hpp"
#include "langact/soft_label.hpp"

namespace langact {

// kAutoregressive trains natural-order generation; kCoarseToFine trains
// refinement, the endpoint probe and endpoint-first generation.
enum class TrainMode : std::uint8_t { kAutoregressive, kCoarseToFine };

std::string_view mode_name(TrainMode m);
TrainMode parse_mode(std::string_view s);  // "ar" | "c2f", throws UsageError

struct TrainConfig {
    TrainMode mode = TrainMode::kCoarseToFine;
    int epochs = 12;
    int batch_size = 16;
    double lr = 1e-3;
    double min_lr_frac = 0.05;   // cosine floor as a fraction of lr
    double warmup_frac = 0.03;   // fraction of all steps spent in linear warmup
    double weight_decay = 0.01;  // decoupled, matrices only
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double grad_clip = 1.0;      // global norm, <= 0 disables
    double understanding_prob = 0.5;
    double ar_aux_prob = 0.5;    // c2f mode: chance to add the endpoint-first generation sequence
    int heldout_eval = 200;      // held-out samples scored per epoch (0 = none)
    std::uint64_t seed = 0;
    SoftTargetParams soft;

    void validate() const;
    static TrainConfig load(const std::string& path);  // YAML; missing keys keep defaults
};

nlohmann::json to_json(const TrainConfig& c);

// Model keys (d_model, n_layers, n_heads, d_ff, max_seq_len, dropout, lambda)
// read from a YAML document on top of `base`. Vocabulary fields are untouched.
ModelConfig load_model_config(const std::string& path, ModelConfig base = {});

// A sample reduced to the three token segments the model sees.
struct EncodedSample {
    std::vector<TokenId> v;
    std::vector<TokenId> l;
    ActionBlock a;  // dreamer trajectory
    InstructionClass cls = InstructionClass::kFaster;
};

EncodedSample encode_sample(const Sample& s, const Codebook& cb, int max_lane_points = 6);
std::vector<EncodedSample> encode_samples(std::span<const Sample> s, const Codebook& cb, int max_lane_points = 6);

// Deterministic split: the last `heldout` samples are held out.
struct Split {
    std::vector<Sample> train;
    std::vector<Sample> heldout;
};
Split split_dataset(std::vector<Sample> samples, std::size_t heldout);

// Sequences one sample contributes to an epoch. `und` selects the
// understanding arrangement; `aux` adds the endpoint-first AR sequence in c2f mode.
std::vector<TokenSequence> epoch_sequences(const EncodedSample& s, TrainMode mode, bool und, bool aux,
                                           double lambda, const Codebook& cb);

struct EpochMetrics {
    int epoch = 0;
    int steps = 0;
    double train_gen = 0.0;
    double train_und = 0.0;
    double heldout_gen = 0.0;
    double heldout_und = 0.0;
    double lr = 0.0;
    double grad_norm = 0.0;     // mean pre-clip global norm
    double clipped_frac = 0.0;  // share of steps that were clipped
    double seconds = 0.0;
};

nlohmann::json to_json(const EpochMetrics& m);

struct TrainResult {
    ModelParameters<float> params;
    std::vector<EpochMetrics> log;
    long long total_steps = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Throws NumericError (with epoch/step in the message) when the loss or the
// gradient goes non-finite. epochs == 0 returns the initialization.
TrainResult train(const ModelConfig& model, const TrainConfig& cfg, std::span<const EncodedSample> data,
                  std::span<const EncodedSample> heldout, const Codebook& cb, const EpochCallback& on_epoch = {});

// Mean held-out losses (no dropout) over refinement/generation and understanding sequences.
std::pair<double, double> heldout_losses(const ModelParameters<float>& p, TrainMode mode,
                                         std::span<const EncodedSample> data, const SoftTargetTable& table,
                                         const Codebook& cb);

// Checkpoint layout, little-endian:
//   magic "LANGACT\0" | u32 version | u32 scalar bytes (4) | u64 meta length | meta JSON
//   | u64 codebook hash | u64 parameter count | parameters (f32) | u64 FNV-1a of all prior bytes
// meta = {"model": ModelConfig, "mode": "ar"|"c2f", "train": TrainConfig}
struct Checkpoint {
    ModelParameters<float> params;
    TrainMode mode = TrainMode::kCoarseToFine;
    std::uint64_t codebook_hash = 0;
    nlohmann::json meta;
};

void save_checkpoint(const std::string& path, const ModelParameters<float>& p, TrainMode mode,
                     std::uint64_t codebook_hash, const nlohmann::json& train_meta = {});
// Throws DataError on a corrupt or truncated file or a codebook hash mismatch.
// When expected_config is given, a differing config is rejected too.
Checkpoint load_checkpoint(const std::string& path, std::uint64_t expected_hash,
                           const ModelConfig* expected_config = nullptr);

}  // namespace langact
