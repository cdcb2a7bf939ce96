#pragma once

// Greedy trajectory decoding: the 30-pass autoregressive baseline and the
// two-pass coarse-to-fine procedure. Action positions are always decoded with
// logits restricted to the action segment.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "langact/codebook.hpp"
#include "langact/model.hpp"
#include "langact/sequence_builder.hpp"
#include "langact/train.hpp"

namespace langact {

struct DecodeResult {
    std::vector<Waypoint> path;       // 20
    std::vector<Waypoint> speed_wps;  // 10
    ActionBlock tokens;               // grid ids, natural order
    ActionBlock coarse;               // c2f only: scaffold fed to pass 2
    ActionTokenId path_end = 0;       // c2f only: pass-1 endpoints
    ActionTokenId speed_end = 0;
    int forward_passes = 0;
    double wall_clock = 0.0;          // seconds spent inside forward passes
};

class Decoder {
public:
    Decoder(const ModelParameters<float>& params, const Codebook& cb, TrainMode mode)
        : params_(params), net_(params), cb_(cb), mode_(mode) {}

    // Token order follows the training mode: natural for ar, endpoint-first for c2f.
    DecodeResult decode_ar(std::span<const TokenId> v, std::span<const TokenId> l) const;
    DecodeResult decode_c2f(std::span<const TokenId> v, std::span<const TokenId> l) const;

    TrainMode mode() const { return mode_; }
    const Codebook& codebook() const { return cb_; }
    const ModelParameters<float>& params() const { return params_; }

private:
    // One instrumented forward; returns masked argmax grid ids at `rows`.
    std::vector<ActionTokenId> argmax_at(std::span<const TokenId> seq, std::span<const std::size_t> rows,
                                         DecodeResult& r) const;
    void finish(DecodeResult& r) const;

    const ModelParameters<float>& params_;
    Transformer<float> net_;
    const Codebook& cb_;
    TrainMode mode_;
};

// Appends far-away obstacle tokens to V until the full decode layout
// reaches at least min_len tokens.
std::vector<TokenId> pad_scene(std::span<const TokenId> v, std::size_t l_len, std::size_t min_len,
                               const Codebook& cb);

// Length of [BOS V SEP L SEP PATH_GOAL path SPEED_GOAL speed EOS].
std::size_t full_layout_length(std::size_t v_len, std::size_t l_len);

struct BenchRow {
    std::string method;
    std::size_t n_params = 0;
    std::size_t seq_len = 0;
    int passes = 0;
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    std::vector<double> trial_ms;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    std::string to_csv() const;  // method,n_params,seq_len,passes,mean_ms,p50_ms,p95_ms
};

struct BenchOptions {
    int trials = 50;
    int warmup = 5;
    std::size_t min_seq_len = 0;  // pad V up to this full layout length (0 = no padding)
};

// Alternates AR and C2F on identical inputs, cycling through `data`.
// Throws UsageError when trials < 1 or data is empty.
BenchReport bench_decode(const Decoder& dec, std::span<const EncodedSample> data, const BenchOptions& opt);

}  // namespace langact
