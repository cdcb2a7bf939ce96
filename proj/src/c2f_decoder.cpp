#include "langact/c2f_decoder.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "langact/errors.hpp"

namespace langact {

std::vector<ActionTokenId> Decoder::argmax_at(std::span<const TokenId> seq, std::span<const std::size_t> rows,
                                              DecodeResult& r) const {
    ForwardCache<float> cache;
    const std::span<const TokenId> one[1] = {seq};
    const auto t0 = std::chrono::steady_clock::now();
    net_.forward(one, cache, 0);
    std::vector<ActionTokenId> out;
    out.reserve(rows.size());
    std::vector<float> z;
    const int lo = params_.config.action_offset;
    const int hi = lo + params_.config.k_action;
    for (std::size_t row : rows) {
        net_.logits(cache, row, lo, hi, z);
        out.push_back(static_cast<ActionTokenId>(std::max_element(z.begin(), z.end()) - z.begin()));
    }
    r.wall_clock += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++r.forward_passes;
    return out;
}

void Decoder::finish(DecodeResult& r) const {
    const GridSpec& g = cb_.grid();
    r.path.clear();
    r.speed_wps.clear();
    for (auto id : r.tokens.path) r.path.push_back(detokenize(id, g));
    for (auto id : r.tokens.speed) r.speed_wps.push_back(detokenize(id, g));
}

DecodeResult Decoder::decode_ar(std::span<const TokenId> v, std::span<const TokenId> l) const {
    DecodeResult r;
    std::vector<TokenId> seq = build_generation_prompt(v, l, cb_).input_ids;
    auto run_block = [&](std::size_t count) {
        std::vector<ActionTokenId> block;
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t last = seq.size() - 1;
            const auto id = argmax_at(seq, std::span<const std::size_t>(&last, 1), r).front();
            block.push_back(id);
            seq.push_back(cb_.action(id));
        }
        return mode_ == TrainMode::kCoarseToFine ? restore_natural_order(block) : block;
    };
    const auto path = run_block(kPathTokens);
    seq.push_back(cb_.special(Special::kSpeedGoal));
    const auto speed = run_block(kSpeedTokens);
    r.tokens = ActionBlock::from(path, speed);
    finish(r);
    return r;
}

DecodeResult Decoder::decode_c2f(std::span<const TokenId> v, std::span<const TokenId> l) const {
    DecodeResult r;
    // Pass 1: both endpoints from adjacent goal tokens.
    const auto probe = build_endpoint_prompt(v, l, cb_);
    const std::size_t goals[2] = {probe.size() - 2, probe.size() - 1};
    const auto ends = argmax_at(probe.input_ids, goals, r);
    r.path_end = ends[0];
    r.speed_end = ends[1];
    r.coarse = coarse_scaffold(r.path_end, r.speed_end, cb_.grid());

    // Pass 2: refine every coarse token in parallel (same-position readout).
    const auto prompt = build_refinement_prompt(v, l, r.coarse, cb_);
    const auto lay = refinement_layout(v.size(), l.size());
    std::vector<std::size_t> rows;
    for (int i = 0; i < kPathTokens; ++i) rows.push_back(lay.first_path + static_cast<std::size_t>(i));
    for (int i = 0; i < kSpeedTokens; ++i) rows.push_back(lay.first_speed + static_cast<std::size_t>(i));
    const auto fine = argmax_at(prompt.input_ids, rows, r);
    r.tokens = ActionBlock::from(std::span(fine).first(kPathTokens), std::span(fine).subspan(kPathTokens));
    finish(r);
    return r;
}

std::size_t full_layout_length(std::size_t v_len, std::size_t l_len) {
    return 1 + v_len + 1 + l_len + 1 + 1 + kPathTokens + 1 + kSpeedTokens + 1;
}

std::vector<TokenId> pad_scene(std::span<const TokenId> v, std::size_t l_len, std::size_t min_len,
                               const Codebook& cb) {
    std::vector<TokenId> out(v.begin(), v.end());
    const GridSpec& g = cb.grid();
    // Obstacles marching along the far edge of the box.
    int k = 0;
    while (full_layout_length(out.size(), l_len) < min_len) {
        const double y = g.y_max - 0.5 * (k % 100);
        out.push_back(cb.special(Special::kClsObstacle));
        out.push_back(cb.action(tokenize_waypoint({g.x_max, y}, g)));
        ++k;
    }
    return out;
}

namespace {

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void fill_stats(BenchRow& row) {
    row.mean_ms = std::accumulate(row.trial_ms.begin(), row.trial_ms.end(), 0.0) /
                  static_cast<double>(row.trial_ms.size());
    row.p50_ms = percentile(row.trial_ms, 0.5);
    row.p95_ms = percentile(row.trial_ms, 0.95);
}

}  // namespace

std::string BenchReport::to_csv() const {
    std::ostringstream os;
    os << "method,n_params,seq_len,passes,mean_ms,p50_ms,p95_ms\n";
    os << std::fixed << std::setprecision(3);
    for (const auto& r : rows) {
        os << r.method << ',' << r.n_params << ',' << r.seq_len << ',' << r.passes << ',' << r.mean_ms << ','
           << r.p50_ms << ',' << r.p95_ms << '\n';
    }
    return os.str();
}

BenchReport bench_decode(const Decoder& dec, std::span<const EncodedSample> data, const BenchOptions& opt) {
    if (opt.trials < 1) throw UsageError("bench needs at least one trial");
    if (opt.warmup < 0) throw UsageError("warmup must be >= 0");
    if (data.empty()) throw UsageError("bench needs at least one sample");
    BenchRow ar, c2f;
    ar.method = "ar";
    c2f.method = "c2f";
    std::size_t len_sum = 0;
    for (int t = -opt.warmup; t < opt.trials; ++t) {
        const auto& s = data[static_cast<std::size_t>(t + opt.warmup) % data.size()];
        const auto v = pad_scene(s.v, s.l.size(), opt.min_seq_len, dec.codebook());
        const auto a = dec.decode_ar(v, s.l);
        const auto c = dec.decode_c2f(v, s.l);
        if (a.forward_passes != kActionTokens || c.forward_passes != 2) {
            throw std::logic_error("bench: unexpected forward pass count");
        }
        if (t < 0) continue;
        ar.trial_ms.push_back(1e3 * a.wall_clock);
        c2f.trial_ms.push_back(1e3 * c.wall_clock);
        len_sum += full_layout_length(v.size(), s.l.size());
    }
    for (auto* row : {&ar, &c2f}) {
        row->n_params = dec.params().values.size();
        row->seq_len = len_sum / static_cast<std::size_t>(opt.trials);
        fill_stats(*row);
    }
    ar.passes = kActionTokens;
    c2f.passes = 2;
    return {{ar, c2f}};
}

}  // namespace langact
