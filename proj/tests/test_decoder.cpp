#include "doctest.h"

#include <sstream>

#include "langact/c2f_decoder.hpp"
#include "langact/errors.hpp"
#include "langact/synth_world.hpp"

using namespace langact;

namespace {

struct Fixture {
    GridSpec g;
    std::vector<Sample> raw = generate_dataset(12, uniform_mix(), 9, g);
    Codebook cb = Codebook::build(instruction_vocabulary(), g);
    std::vector<EncodedSample> data = encode_samples(raw, cb);
    ModelConfig model;

    Fixture() {
        model = ModelConfig::for_codebook(cb);
        model.d_model = 32;
        model.n_layers = 2;
        model.n_heads = 2;
        model.d_ff = 64;
        model.dropout = 0.0;
    }
};

void check_domain(const DecodeResult& r, const GridSpec& g) {
    REQUIRE(r.path.size() == 20);
    REQUIRE(r.speed_wps.size() == 10);
    for (int i = 0; i < 20; ++i) {
        CHECK(r.tokens.path[i] >= 0);
        CHECK(r.tokens.path[i] < 5656);
        CHECK(r.path[i].x == detokenize(r.tokens.path[i], g).x);
        CHECK(r.path[i].y == detokenize(r.tokens.path[i], g).y);
    }
    for (int i = 0; i < 10; ++i) {
        CHECK(r.tokens.speed[i] >= 0);
        CHECK(r.tokens.speed[i] < 5656);
        CHECK(r.speed_wps[i].x == detokenize(r.tokens.speed[i], g).x);
    }
    CHECK(r.wall_clock > 0.0);
}

}  // namespace

TEST_CASE("pass counts, determinism and output domain on an untrained model") {
    Fixture f;
    const auto p = ModelParameters<float>::init(f.model, 4);
    for (auto mode : {TrainMode::kAutoregressive, TrainMode::kCoarseToFine}) {
        const Decoder dec(p, f.cb, mode);
        const auto& s = f.data[0];
        const auto ar = dec.decode_ar(s.v, s.l);
        const auto c2f = dec.decode_c2f(s.v, s.l);
        CHECK(ar.forward_passes == 30);
        CHECK(c2f.forward_passes == 2);
        check_domain(ar, f.g);
        check_domain(c2f, f.g);
        CHECK(dec.decode_ar(s.v, s.l).tokens == ar.tokens);
        CHECK(dec.decode_c2f(s.v, s.l).tokens == c2f.tokens);
        CHECK(c2f.coarse == coarse_scaffold(c2f.path_end, c2f.speed_end, f.g));
    }
}

TEST_CASE("a memorized sample is reproduced by both decoders") {
    Fixture f;
    const std::vector<EncodedSample> same(128, f.data[3]);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.lr = 3e-3;
    cfg.heldout_eval = 0;
    cfg.ar_aux_prob = 1.0;
    cfg.seed = 1;
    const auto r = train(f.model, cfg, same, {}, f.cb);
    const Decoder dec(r.params, f.cb, TrainMode::kCoarseToFine);
    const auto& s = same[0];
    const auto c2f = dec.decode_c2f(s.v, s.l);
    CHECK(c2f.path_end == s.a.path[19]);
    CHECK(c2f.speed_end == s.a.speed[9]);
    CHECK(c2f.tokens == s.a);
    CHECK(dec.decode_ar(s.v, s.l).tokens == s.a);
}

TEST_CASE("scene padding reaches the requested layout length") {
    Fixture f;
    const auto& s = f.data[0];
    CHECK(full_layout_length(s.v.size(), s.l.size()) == s.v.size() + s.l.size() + 36);
    const auto padded = pad_scene(s.v, s.l.size(), 120, f.cb);
    CHECK(full_layout_length(padded.size(), s.l.size()) >= 120);
    CHECK(full_layout_length(padded.size(), s.l.size()) <= 121);
    CHECK(std::equal(s.v.begin(), s.v.end(), padded.begin()));
    CHECK(pad_scene(s.v, s.l.size(), 0, f.cb) == s.v);
    CHECK(padded.size() % 2 == 0);
}

TEST_CASE("bench runs both methods on identical inputs") {
    Fixture f;
    const auto p = ModelParameters<float>::init(f.model, 4);
    const Decoder dec(p, f.cb, TrainMode::kCoarseToFine);
    BenchOptions opt;
    opt.trials = 3;
    opt.warmup = 1;
    opt.min_seq_len = 120;
    const auto rep = bench_decode(dec, f.data, opt);
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[0].method == "ar");
    CHECK(rep.rows[0].passes == 30);
    CHECK(rep.rows[1].method == "c2f");
    CHECK(rep.rows[1].passes == 2);
    for (const auto& row : rep.rows) {
        CHECK(row.seq_len >= 120);
        CHECK(row.n_params == p.values.size());
        CHECK(row.trial_ms.size() == 3);
        CHECK(row.p50_ms <= row.p95_ms);
    }
    CHECK(rep.rows[0].seq_len == rep.rows[1].seq_len);
    std::istringstream csv(rep.to_csv());
    std::string header;
    std::getline(csv, header);
    CHECK(header == "method,n_params,seq_len,passes,mean_ms,p50_ms,p95_ms");
    opt.trials = 0;
    CHECK_THROWS_AS(bench_decode(dec, f.data, opt), UsageError);
    opt.trials = 1;
    CHECK_THROWS_AS(bench_decode(dec, std::span<const EncodedSample>{}, opt), UsageError);
}
