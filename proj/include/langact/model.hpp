#pragma once

// Compact decoder-only transformer over the unified codebook.
//
// Pre-LN blocks (LN -> causal MHA -> residual, LN -> GELU MLP -> residual),
// learned positional embeddings, one output head over the whole vocabulary.
// Gradients are computed analytically; there is no autograd.
//
// Parameter layout (flat, in this order; matrices row-major):
//   tok_emb [K, d]  pos_emb [max_seq_len, d]
//   per layer: ln1_g [d] ln1_b [d] w_qkv [d, 3d] b_qkv [3d] w_o [d, d] b_o [d]
//              ln2_g [d] ln2_b [d] w_1 [d, d_ff] b_1 [d_ff] w_2 [d_ff, d] b_2 [d]
//   lnf_g [d] lnf_b [d] w_out [K, d] b_out [K]
// With tie_embeddings, w_out is tok_emb itself and takes no storage.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/StdVector>
#include <nlohmann/json.hpp>

#include "langact/codebook.hpp"
#include "langact/sequence_builder.hpp"
#include "langact/soft_label.hpp"

namespace langact {

struct ModelConfig {
    int d_model = 128;
    int n_layers = 4;
    int n_heads = 4;
    int d_ff = 256;
    int max_seq_len = 160;
    int vocab_size = 0;
    int action_offset = 0;
    int k_action = 0;
    double dropout = 0.1;
    double lambda = 1.0;
    bool tie_embeddings = false;

    void validate() const;
    static ModelConfig for_codebook(const Codebook& cb);

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct Slot {
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 1;
    std::size_t size() const { return rows * cols; }
};

struct LayerSlots {
    Slot ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o, ln2_g, ln2_b, w_1, b_1, w_2, b_2;
};

struct ParamLayout {
    Slot tok_emb, pos_emb;
    std::vector<LayerSlots> layers;
    Slot lnf_g, lnf_b, w_out, b_out;
    std::size_t total = 0;

    static ParamLayout make(const ModelConfig& c);
    // (name, slot) in storage order.
    std::vector<std::pair<std::string, Slot>> named() const;
};

// Fixed base alignment keeps Eigen's vectorized paths, and so the rounding,
// identical from one allocation to the next.
template <typename T>
using ParamVec = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename T>
struct ModelParameters {
    ModelConfig config;
    ParamLayout layout;
    ParamVec<T> values;

    static ModelParameters init(const ModelConfig& config, std::uint64_t seed);

    std::span<T> slot(const Slot& s) { return {values.data() + s.offset, s.size()}; }
    std::span<const T> slot(const Slot& s) const { return {values.data() + s.offset, s.size()}; }

    template <typename U>
    ModelParameters<U> cast() const {
        ModelParameters<U> out{config, layout, {}};
        out.values.assign(values.begin(), values.end());
        return out;
    }
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct LayerCache {
    RowMat<T> xhat1, ln1;
    ColVec<T> rstd1;
    RowMat<T> qkv;
    std::vector<RowMat<T>> probs;  // [seq * n_heads + head], L x L
    RowMat<T> attn;
    RowMat<T> mask_attn;  // empty when dropout is off
    RowMat<T> xhat2, ln2;
    ColVec<T> rstd2;
    RowMat<T> ff_pre, ff_act;
    RowMat<T> mask_ff;
};

// Activations of one batched forward pass. Sequences are stacked row-wise.
template <typename T>
struct ForwardCache {
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> lengths;
    std::vector<TokenId> ids;
    std::vector<int> positions;
    RowMat<T> mask_emb;
    std::vector<LayerCache<T>> layers;
    RowMat<T> xhat_f;
    ColVec<T> rstd_f;
    RowMat<T> hidden;  // final LN output, rows = total tokens

    std::size_t rows() const { return ids.size(); }
    std::size_t row(std::size_t seq, std::size_t pos) const { return offsets[seq] + pos; }
};

struct LossBreakdown {
    double total = 0.0;
    double generation = 0.0;     // mean over soft-target positions
    double understanding = 0.0;  // mean over hard-target positions
    int n_generation = 0;
    int n_understanding = 0;
};

template <typename T>
class Transformer {
public:
    explicit Transformer(const ModelParameters<T>& params) : p_(params) {}

    // dropout_seed == 0 disables dropout. Throws std::length_error when a
    // sequence exceeds max_seq_len and std::out_of_range for bad token ids.
    void forward(std::span<const std::span<const TokenId>> seqs, ForwardCache<T>& cache,
                 std::uint64_t dropout_seed = 0) const;

    // Logits of one stacked row over vocabulary columns [lo, hi).
    void logits(const ForwardCache<T>& cache, std::size_t row, int lo, int hi,
                std::vector<T>& out) const;

    // All K logits at every position of a single sequence (row-major L x K).
    RowMat<T> all_logits(std::span<const TokenId> seq) const;

    // Soft targets are scored over the action segment, hard targets over the
    // full vocabulary. total = mean(gen) + lambda * mean(und). When grad is
    // non-null it must have values.size() entries and is overwritten.
    LossBreakdown loss(std::span<const TokenSequence* const> batch, const SoftTargetTable& targets,
                       double lambda, ParamVec<T>* grad, std::uint64_t dropout_seed = 0) const;

    const ModelParameters<T>& params() const { return p_; }

private:
    void backward(const ForwardCache<T>& cache, const RowMat<T>& d_hidden, ParamVec<T>& grad) const;

    const ModelParameters<T>& p_;
};

extern template struct ModelParameters<float>;
extern template struct ModelParameters<double>;
extern template class Transformer<float>;
extern template class Transformer<double>;

}  // namespace langact
