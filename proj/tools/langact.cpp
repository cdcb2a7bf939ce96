// langact: command-line entry point for every pipeline stage.
// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric/training failure.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "langact/c2f_decoder.hpp"
#include "langact/codebook.hpp"
#include "langact/dreaming_eval.hpp"
#include "langact/errors.hpp"
#include "langact/experiment_harness.hpp"
#include "langact/grid_codec.hpp"
#include "langact/plot.hpp"
#include "langact/soft_label.hpp"
#include "langact/synth_world.hpp"
#include "langact/train.hpp"

using namespace langact;
using json = nlohmann::json;

namespace {

GridSpec grid_from(const std::string& path) { return path.empty() ? GridSpec{} : load_grid_spec(path); }

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) throw DataError("cannot write '" + path + "'");
}

std::string codebook_path(const std::string& ckpt) { return ckpt + ".codebook"; }

// Codebook words: the template vocabulary plus anything in the data.
std::vector<std::string> vocabulary_for(const std::vector<Sample>& data) {
    std::set<std::string> words;
    for (auto& w : instruction_vocabulary()) words.insert(w);
    for (const auto& s : data) {
        for (auto& w : normalize_text(s.instruction)) words.insert(w);
    }
    return {words.begin(), words.end()};
}

json tokenize_value(const json& j, const GridSpec& g) {
    if (j.is_array()) {
        json out = json::array();
        for (const auto& w : waypoints_from_json(j)) out.push_back(tokenize_waypoint(w, g));
        return out;
    }
    if (j.is_object()) {
        json out = json::object();
        for (const auto& [k, v] : j.items()) out[k] = tokenize_value(v, g);
        return out;
    }
    throw DataError("expected a waypoint list or an object of waypoint lists");
}

json detokenize_value(const json& j, const GridSpec& g) {
    if (j.is_array()) {
        std::vector<Waypoint> wps;
        for (const auto& id : j) {
            if (!id.is_number_integer()) throw DataError("token ids must be integers");
            try {
                wps.push_back(detokenize(id.get<ActionTokenId>(), g));
            } catch (const std::out_of_range& e) {
                throw DataError(e.what());
            }
        }
        return waypoints_to_json(wps);
    }
    if (j.is_object()) {
        json out = json::object();
        for (const auto& [k, v] : j.items()) out[k] = detokenize_value(v, g);
        return out;
    }
    throw DataError("expected a token list or an object of token lists");
}

struct Loaded {
    Codebook cb;
    Checkpoint ck;
};

Loaded load_model(const std::string& ckpt) {
    Codebook cb = Codebook::load(codebook_path(ckpt));
    Checkpoint ck = load_checkpoint(ckpt, cb.hash());
    return {std::move(cb), std::move(ck)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Language-conditioned action tokens: data, training, decoding and evaluation"};
    app.require_subcommand(1);

    // tokenize / detokenize
    std::string tok_in, tok_out, tok_spec;
    auto* tok = app.add_subcommand("tokenize", "Waypoints JSON -> action token ids JSON");
    tok->add_option("--in", tok_in, "JSON: [[x,y],...] or {\"path\": [...], \"speed_wps\": [...]}")->required();
    tok->add_option("--spec", tok_spec, "grid spec YAML (default: x 0..50, y -30..30, k 5, step 0.1)");
    tok->add_option("--out", tok_out, "output file (default stdout)");

    std::string detok_in, detok_out, detok_spec;
    auto* detok = app.add_subcommand("detokenize", "Action token ids JSON -> cell-center waypoints JSON");
    detok->add_option("--in", detok_in, "JSON: [id,...] or an object of id lists")->required();
    detok->add_option("--spec", detok_spec, "grid spec YAML");
    detok->add_option("--out", detok_out, "output file (default stdout)");

    // soft-target
    int st_id = 0;
    double st_sigma = 1.2;
    int st_radius = 10;
    std::string st_spec, st_out;
    auto* st = app.add_subcommand("soft-target", "Spatial soft label around one token as CSV");
    st->add_option("--id", st_id, "center action token id")->required();
    st->add_option("--sigma", st_sigma, "Gaussian spread in cells")->capture_default_str();
    st->add_option("--radius", st_radius, "truncation radius in cells (0 = one-hot)")->capture_default_str();
    st->add_option("--spec", st_spec, "grid spec YAML");
    st->add_option("--out", st_out, "output CSV (default stdout)");

    // gen-data
    int gd_n = 1000;
    std::string gd_mix = "uniform", gd_out, gd_sim, gd_spec;
    std::uint64_t gd_seed = 0;
    auto* gd = app.add_subcommand("gen-data", "Generate a synthetic dataset (JSONL) and print its summary");
    gd->add_option("--n", gd_n, "number of samples")->capture_default_str();
    gd->add_option("--mix", gd_mix, "class weights, e.g. Faster=1,Stop=2 or uniform")->capture_default_str();
    gd->add_option("--seed", gd_seed, "dataset seed")->capture_default_str();
    gd->add_option("--out", gd_out, "output JSONL")->required();
    gd->add_option("--sim", gd_sim, "simulator config YAML");
    gd->add_option("--spec", gd_spec, "grid spec YAML");

    // train
    std::string tr_data, tr_config, tr_out, tr_spec, tr_log, tr_mode;
    int tr_heldout = 500, tr_epochs = -1;
    std::uint64_t tr_seed = 0;
    double tr_lambda = -1.0;
    auto* tr = app.add_subcommand("train", "Train a model; writes <out>, <out>.codebook and a metrics log");
    tr->add_option("--data", tr_data, "training JSONL")->required();
    tr->add_option("--config", tr_config, "YAML with model and training keys");
    tr->add_option("--out", tr_out, "checkpoint path")->required();
    tr->add_option("--spec", tr_spec, "grid spec YAML");
    tr->add_option("--heldout", tr_heldout, "trailing samples held out for metrics")->capture_default_str();
    tr->add_option("--seed", tr_seed, "training seed")->capture_default_str();
    tr->add_option("--mode", tr_mode, "ar or c2f (overrides the config)");
    tr->add_option("--epochs", tr_epochs, "epochs (overrides the config)");
    tr->add_option("--lambda", tr_lambda, "understanding-loss weight (overrides the config)");
    tr->add_option("--log", tr_log, "metrics JSONL (default <out>.metrics.jsonl)");

    // eval-dream
    std::string ev_ckpt, ev_data, ev_out, ev_pred, ev_pred_out, ev_method;
    bool ev_dreamer = false;
    int ev_limit = 0;
    auto* ev = app.add_subcommand("eval-dream", "Dreaming success rates per instruction class");
    ev->add_option("--ckpt", ev_ckpt, "checkpoint to decode with");
    ev->add_option("--data", ev_data, "dataset JSONL")->required();
    ev->add_option("--out", ev_out, "report CSV (default stdout)");
    ev->add_option("--pred", ev_pred, "score an existing predictions JSONL instead of decoding");
    ev->add_flag("--dreamer", ev_dreamer, "score the dataset's own dreamer trajectories");
    ev->add_option("--method", ev_method, "ar or c2f (default: the checkpoint's training mode)");
    ev->add_option("--pred-out", ev_pred_out, "write decoded predictions JSONL");
    ev->add_option("--limit", ev_limit, "only the last N samples (0 = all)")->capture_default_str();

    // bench
    std::string bn_ckpt, bn_data, bn_out;
    int bn_trials = 50, bn_warmup = 5, bn_min_len = 120;
    auto* bn = app.add_subcommand("bench", "AR vs C2F latency and forward-pass counts as CSV");
    bn->add_option("--ckpt", bn_ckpt, "checkpoint")->required();
    bn->add_option("--data", bn_data, "dataset JSONL")->required();
    bn->add_option("--trials", bn_trials, "timed trials per method")->capture_default_str();
    bn->add_option("--warmup", bn_warmup, "untimed warmup trials")->capture_default_str();
    bn->add_option("--min-seq-len", bn_min_len, "pad the scene so the full layout has at least this many tokens")
        ->capture_default_str();
    bn->add_option("--out", bn_out, "CSV output (default stdout)");

    // ablate
    std::string ab_plan, ab_out;
    auto* ab = app.add_subcommand("ablate", "Run an ablation plan; writes <out>.csv and <out>.md");
    ab->add_option("--plan", ab_plan, "plan YAML")->required();
    ab->add_option("--out", ab_out, "output prefix (default: plan name in the current directory)");

    // plot
    std::string pl_data, pl_pred, pl_out, pl_spec;
    std::size_t pl_index = 0;
    bool pl_no_grid = false;
    auto* pl = app.add_subcommand("plot", "Static SVG of one sample and an optional prediction");
    pl->add_option("--data", pl_data, "dataset JSONL")->required();
    pl->add_option("--sample", pl_index, "sample index")->capture_default_str();
    pl->add_option("--pred", pl_pred, "predictions JSONL aligned with the dataset");
    pl->add_option("--out", pl_out, "SVG output")->required();
    pl->add_option("--spec", pl_spec, "grid spec YAML");
    pl->add_flag("--no-grid", pl_no_grid, "omit the log-grid cell boundaries");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? static_cast<int>(ExitCode::kOk) : static_cast<int>(ExitCode::kUsage);
    }

    try {
        if (*tok) {
            const GridSpec g = grid_from(tok_spec);
            write_text(tok_out, tokenize_value(read_json_file(tok_in), g).dump() + "\n");
        } else if (*detok) {
            const GridSpec g = grid_from(detok_spec);
            write_text(detok_out, detokenize_value(read_json_file(detok_in), g).dump() + "\n");
        } else if (*st) {
            const GridSpec g = grid_from(st_spec);
            const SoftTargetParams params{st_sigma, st_radius};
            try {
                params.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            if (st_id < 0 || st_id >= grid_size(g).k_action) {
                throw UsageError("--id must be in [0, " + std::to_string(grid_size(g).k_action) + ")");
            }
            std::ostringstream os;
            os << "id,i_x,i_y,prob\n" << std::setprecision(10);
            for (const auto& e : soft_target(st_id, params, g).entries) {
                const auto c = cell_of(e.id, g);
                os << e.id << ',' << c.i_x << ',' << c.i_y << ',' << e.prob << '\n';
            }
            write_text(st_out, os.str());
        } else if (*gd) {
            const GridSpec g = grid_from(gd_spec);
            const SimConfig sim = gd_sim.empty() ? SimConfig{} : SimConfig::load(gd_sim);
            const auto summary = build_dataset(gd_n, parse_mix(gd_mix), gd_seed, gd_out, g, sim);
            std::cout << summary.to_json().dump(2) << '\n';
        } else if (*tr) {
            const GridSpec g = grid_from(tr_spec);
            const auto data = read_samples(tr_data);
            const Codebook cb = Codebook::build(vocabulary_for(data), g);
            ModelConfig mc = ModelConfig::for_codebook(cb);
            TrainConfig tc;
            if (!tr_config.empty()) {
                mc = load_model_config(tr_config, mc);
                tc = TrainConfig::load(tr_config);
            }
            tc.seed = tr_seed;
            if (!tr_mode.empty()) tc.mode = parse_mode(tr_mode);
            if (tr_epochs >= 0) tc.epochs = tr_epochs;
            if (tr_lambda >= 0.0) mc.lambda = tr_lambda;
            try {
                mc.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            const auto split = split_dataset(data, static_cast<std::size_t>(std::max(0, tr_heldout)));
            const auto train_set = encode_samples(split.train, cb);
            const auto held = encode_samples(split.heldout, cb);
            const std::string log_path = tr_log.empty() ? tr_out + ".metrics.jsonl" : tr_log;
            std::ofstream log(log_path);
            if (!log) throw DataError("cannot write '" + log_path + "'");
            std::cerr << "training " << mode_name(tc.mode) << " model: " << ParamLayout::make(mc).total
                      << " parameters, " << train_set.size() << " train / " << held.size() << " held-out samples\n";
            const auto res = train(mc, tc, train_set, held, cb, [&](const EpochMetrics& m) {
                log << to_json(m).dump() << '\n';
                log.flush();
                std::cerr << "epoch " << m.epoch << ": gen " << m.train_gen << " und " << m.train_und
                          << " | held-out gen " << m.heldout_gen << " und " << m.heldout_und << " | "
                          << m.seconds << " s\n";
            });
            save_checkpoint(tr_out, res.params, tc.mode, cb.hash(), to_json(tc));
            cb.save(codebook_path(tr_out));
            std::cerr << "wrote " << tr_out << " and " << codebook_path(tr_out) << '\n';
        } else if (*ev) {
            auto data = read_samples(ev_data);
            if (ev_limit > 0 && static_cast<std::size_t>(ev_limit) < data.size()) {
                data.erase(data.begin(), data.end() - ev_limit);
            }
            std::vector<Prediction> preds;
            if (ev_dreamer) {
                for (const auto& s : data) preds.push_back(dreamer_as_prediction(s));
            } else if (!ev_pred.empty()) {
                preds = read_predictions(ev_pred);
                if (ev_limit > 0 && static_cast<std::size_t>(ev_limit) < preds.size()) {
                    preds.erase(preds.begin(), preds.end() - ev_limit);
                }
                if (preds.size() != data.size()) throw DataError("prediction count does not match the dataset");
            } else {
                if (ev_ckpt.empty()) throw UsageError("eval-dream needs --ckpt, --pred or --dreamer");
                const auto m = load_model(ev_ckpt);
                const Decoder dec(m.ck.params, m.cb, m.ck.mode);
                const auto method = ev_method.empty() ? default_method(m.ck.mode) : parse_method(ev_method);
                preds = predict_dataset(dec, data, method);
            }
            for (const auto& p : preds) {
                if (p.path.size() != 20 || p.speed_wps.size() != 10) {
                    throw DataError("predictions must have 20 path and 10 speed waypoints");
                }
            }
            if (!ev_pred_out.empty()) write_predictions(ev_pred_out, data, preds);
            const auto rep = evaluate_dataset(preds, data);
            write_text(ev_out, rep.to_csv());
            std::cerr << rep.pretty();
        } else if (*bn) {
            const auto m = load_model(bn_ckpt);
            const auto data = encode_samples(read_samples(bn_data), m.cb);
            const Decoder dec(m.ck.params, m.cb, m.ck.mode);
            BenchOptions bo;
            bo.trials = bn_trials;
            bo.warmup = bn_warmup;
            bo.min_seq_len = static_cast<std::size_t>(std::max(0, bn_min_len));
            const auto rep = bench_decode(dec, data, bo);
            std::cerr << "# c2f pass 1 predicts the path and speed endpoints jointly (2 passes total)\n";
            write_text(bn_out, rep.to_csv());
        } else if (*ab) {
            const auto plan = ExperimentPlan::load(ab_plan);
            const auto rep = run_ablation(plan, [](const std::string& msg) { std::cerr << msg << '\n'; });
            const std::string prefix = ab_out.empty() ? plan.name : ab_out;
            write_text(prefix + ".csv", rep.to_csv());
            write_text(prefix + ".md", rep.to_markdown());
            std::cout << rep.to_markdown();
            for (const auto& v : rep.variants) {
                if (v.failed()) return static_cast<int>(ExitCode::kNumeric);
            }
        } else if (*pl) {
            const GridSpec g = grid_from(pl_spec);
            const auto data = read_samples(pl_data);
            if (pl_index >= data.size()) {
                throw UsageError("--sample " + std::to_string(pl_index) + " is out of range (dataset has " +
                                 std::to_string(data.size()) + " samples)");
            }
            std::optional<Prediction> pred;
            if (!pl_pred.empty()) {
                const auto preds = read_predictions(pl_pred);
                if (pl_index >= preds.size()) throw DataError("predictions file has too few records");
                pred = preds[pl_index];
            }
            PlotOptions po;
            po.grid_lines = !pl_no_grid;
            write_text(pl_out, plot_sample_svg(data[pl_index], pred, g, po));
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kUsage);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kNumeric);
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kData);
    }
    return static_cast<int>(ExitCode::kOk);
}
