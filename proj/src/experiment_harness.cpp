#include "langact/experiment_harness.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <set>
#include <sstream>

#include "langact/errors.hpp"
#include "yaml_config.hpp"

namespace langact {

std::string_view method_name(DecodeMethod m) { return m == DecodeMethod::kAutoregressive ? "ar" : "c2f"; }

DecodeMethod parse_method(std::string_view s) {
    if (s == "ar") return DecodeMethod::kAutoregressive;
    if (s == "c2f") return DecodeMethod::kCoarseToFine;
    throw UsageError("unknown decode method '" + std::string(s) + "' (expected ar or c2f)");
}

DecodeMethod default_method(TrainMode mode) {
    return mode == TrainMode::kAutoregressive ? DecodeMethod::kAutoregressive : DecodeMethod::kCoarseToFine;
}

nlohmann::json Overrides::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (lambda) j["lambda"] = *lambda;
    if (sigma) j["sigma"] = *sigma;
    if (radius) j["radius"] = *radius;
    if (k) j["k"] = *k;
    if (mode) j["mode"] = mode_name(*mode);
    return j;
}

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of an empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void ExperimentPlan::validate() const {
    if (n_train < 1 || n_heldout < 1) throw UsageError("plan needs n_train >= 1 and n_heldout >= 1");
    if (seeds.empty()) throw UsageError("plan needs at least one seed");
    if (variants.empty()) throw UsageError("plan needs at least one variant");
    std::set<std::string> names;
    for (const auto& v : variants) {
        if (v.name.empty()) throw UsageError("every variant needs a name");
        if (!names.insert(v.name).second) throw UsageError("duplicate variant name '" + v.name + "'");
    }
    if (bench_trials < 1) throw UsageError("bench_trials must be >= 1");
    train.validate();
}

ExperimentPlan ExperimentPlan::load(const std::string& path) {
    YAML::Node doc;
    try {
        doc = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw DataError("cannot read plan '" + path + "': " + e.what());
    }
    ExperimentPlan p;
    try {
        detail::read_key(doc, "name", p.name);
        if (const auto d = doc["data"]) {
            detail::read_key(d, "seed", p.data_seed);
            detail::read_key(d, "n_train", p.n_train);
            detail::read_key(d, "n_heldout", p.n_heldout);
            if (d["mix"]) p.mix = parse_mix(d["mix"].as<std::string>());
        }
        if (const auto g = doc["grid"]) {
            detail::read_key(g, "x_min", p.grid.x_min);
            detail::read_key(g, "x_max", p.grid.x_max);
            detail::read_key(g, "y_min", p.grid.y_min);
            detail::read_key(g, "y_max", p.grid.y_max);
            detail::read_key(g, "k", p.grid.k);
            detail::read_key(g, "step", p.grid.step);
        }
        detail::read_model(doc["model"], p.model);
        detail::read_train(doc["train"], p.train);
        if (doc["seeds"]) {
            p.seeds = doc["seeds"].as<std::vector<std::uint64_t>>();
        } else if (doc["n_seeds"]) {
            const int n = doc["n_seeds"].as<int>();
            if (n < 1) throw UsageError("n_seeds must be >= 1");
            p.seeds.clear();
            for (int i = 0; i < n; ++i) p.seeds.push_back(static_cast<std::uint64_t>(i));
        }
        detail::read_key(doc, "bench", p.bench);
        detail::read_key(doc, "bench_trials", p.bench_trials);
        const std::set<std::string> allowed{"name", "lambda", "sigma", "radius", "k", "mode"};
        for (const auto& vn : doc["variants"]) {
            Variant v;
            for (const auto& kv : vn) {
                const auto key = kv.first.as<std::string>();
                if (!allowed.contains(key)) {
                    throw UsageError("variant key '" + key + "' is not overridable (allowed: lambda, sigma, radius, k, mode)");
                }
            }
            v.name = vn["name"] ? vn["name"].as<std::string>() : "";
            if (vn["lambda"]) v.overrides.lambda = vn["lambda"].as<double>();
            if (vn["sigma"]) v.overrides.sigma = vn["sigma"].as<double>();
            if (vn["radius"]) v.overrides.radius = vn["radius"].as<int>();
            if (vn["k"]) v.overrides.k = vn["k"].as<double>();
            if (vn["mode"]) v.overrides.mode = parse_mode(vn["mode"].as<std::string>());
            p.variants.push_back(std::move(v));
        }
    } catch (const YAML::Exception& e) {
        throw UsageError("bad plan '" + path + "': " + e.what());
    }
    p.validate();
    return p;
}

VariantSetup setup_variant(const ExperimentPlan& plan, const Variant& v, std::uint64_t seed,
                           const std::vector<std::string>& words) {
    GridSpec grid = plan.grid;
    if (v.overrides.k) grid.k = *v.overrides.k;
    grid.validate();
    Codebook cb = Codebook::build(words, grid);
    ModelConfig m = plan.model;
    const ModelConfig vocab = ModelConfig::for_codebook(cb);
    m.vocab_size = vocab.vocab_size;
    m.action_offset = vocab.action_offset;
    m.k_action = vocab.k_action;
    if (v.overrides.lambda) m.lambda = *v.overrides.lambda;
    TrainConfig t = plan.train;
    t.seed = seed;
    if (v.overrides.sigma) t.soft.sigma = *v.overrides.sigma;
    if (v.overrides.radius) t.soft.radius = *v.overrides.radius;
    if (v.overrides.mode) t.mode = *v.overrides.mode;
    return {grid, m, t, std::move(cb)};
}

std::vector<Prediction> predict_dataset(const Decoder& dec, std::span<const Sample> samples, DecodeMethod method,
                                        int max_lane_points) {
    std::vector<Prediction> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        const auto v = scene_to_tokens(s.scene, dec.codebook(), max_lane_points);
        const auto l = dec.codebook().encode_text(s.instruction);
        const auto r = method == DecodeMethod::kCoarseToFine ? dec.decode_c2f(v, l) : dec.decode_ar(v, l);
        out.push_back({r.path, r.speed_wps});
    }
    return out;
}

bool VariantResult::failed() const {
    return std::any_of(seeds.begin(), seeds.end(), [](const SeedResult& s) { return !s.ok; });
}

std::optional<double> VariantResult::median_success() const {
    std::vector<double> v;
    for (const auto& s : seeds) {
        if (auto m = s.mean_success()) v.push_back(*m);
    }
    if (v.empty()) return std::nullopt;
    return median(v);
}

namespace {

std::string fmt(std::optional<double> v, int prec = 4) {
    if (!v) return "N/A";
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << *v;
    return os.str();
}

}  // namespace

std::string AblationReport::to_csv() const {
    std::ostringstream os;
    os << "variant,seed,status,mean_success";
    for (auto c : kAllClasses) os << ',' << class_name(c);
    os << ",heldout_gen,heldout_und,steps,train_s,ar_ms,c2f_ms\n";
    for (const auto& v : variants) {
        for (const auto& s : v.seeds) {
            os << v.variant.name << ',' << s.seed << ',' << (s.ok ? "ok" : "failed") << ',' << fmt(s.mean_success());
            for (const auto& c : s.report.classes) os << ',' << fmt(s.ok ? c.rate() : std::nullopt);
            os << ',' << fmt(s.ok ? std::optional(s.heldout_gen) : std::nullopt) << ','
               << fmt(s.ok ? std::optional(s.heldout_und) : std::nullopt) << ',' << s.steps << ','
               << fmt(s.train_seconds, 1) << ',' << fmt(s.ar_ms, 3) << ',' << fmt(s.c2f_ms, 3) << '\n';
        }
        os << v.variant.name << ",median," << (v.failed() ? "failed" : "ok") << ',' << fmt(v.median_success());
        for (std::size_t c = 0; c < 6; ++c) {
            std::vector<double> r;
            for (const auto& s : v.seeds) {
                if (auto x = s.ok ? s.report.classes[c].rate() : std::nullopt) r.push_back(*x);
            }
            os << ',' << fmt(r.empty() ? std::nullopt : std::optional(median(r)));
        }
        os << ",,,,,,\n";
    }
    return os.str();
}

std::string AblationReport::to_markdown() const {
    std::ostringstream os;
    os << "# " << name << "\n\n";
    os << "| variant | overrides | per-seed mean success | median |";
    for (auto c : kAllClasses) os << ' ' << class_name(c) << " |";
    os << "\n|---|---|---|---|";
    for (std::size_t i = 0; i < 6; ++i) os << "---|";
    os << '\n';
    for (const auto& v : variants) {
        os << "| " << v.variant.name << " | `" << v.variant.overrides.to_json().dump() << "` | ";
        for (std::size_t i = 0; i < v.seeds.size(); ++i) {
            const auto& s = v.seeds[i];
            os << (i ? ", " : "") << s.seed << ':' << (s.ok ? fmt(s.mean_success(), 3) : "FAILED");
        }
        os << " | " << fmt(v.median_success(), 3) << (v.failed() ? " (failed)" : "") << " |";
        for (std::size_t c = 0; c < 6; ++c) {
            std::vector<double> r;
            for (const auto& s : v.seeds) {
                if (auto x = s.ok ? s.report.classes[c].rate() : std::nullopt) r.push_back(*x);
            }
            os << ' ' << fmt(r.empty() ? std::nullopt : std::optional(median(r)), 3) << " |";
        }
        os << '\n';
    }
    return os.str();
}

AblationReport run_ablation(const ExperimentPlan& plan, const ProgressFn& progress) {
    plan.validate();
    auto say = [&](const std::string& m) {
        if (progress) progress(m);
    };
    say("generating " + std::to_string(plan.n_train + plan.n_heldout) + " samples");
    auto all = generate_dataset(plan.n_train + plan.n_heldout, plan.mix, plan.data_seed, plan.grid, plan.sim);
    const Split split = split_dataset(std::move(all), static_cast<std::size_t>(plan.n_heldout));
    const auto words = instruction_vocabulary();

    AblationReport rep;
    rep.name = plan.name;
    for (const auto& variant : plan.variants) {
        VariantResult vr;
        vr.variant = variant;
        for (auto seed : plan.seeds) {
            SeedResult sr;
            sr.seed = seed;
            try {
                const auto setup = setup_variant(plan, variant, seed, words);
                const auto train_set = encode_samples(split.train, setup.codebook, plan.sim.max_lane_points);
                const auto held = encode_samples(split.heldout, setup.codebook, plan.sim.max_lane_points);
                const auto t0 = std::chrono::steady_clock::now();
                auto res = train(setup.model, setup.train, train_set, held, setup.codebook,
                                 [&](const EpochMetrics& m) {
                                     std::ostringstream os;
                                     os << variant.name << " seed " << seed << " epoch " << m.epoch
                                        << " gen " << std::setprecision(4) << m.train_gen << " und "
                                        << m.train_und << " held_gen " << m.heldout_gen << " |g| " << m.grad_norm
                                        << " clipped " << m.clipped_frac << " ("
                                        << std::setprecision(3) << m.seconds << " s)";
                                     say(os.str());
                                 });
                sr.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                sr.steps = res.total_steps;
                if (!res.log.empty()) {
                    sr.heldout_gen = res.log.back().heldout_gen;
                    sr.heldout_und = res.log.back().heldout_und;
                }
                const Decoder dec(res.params, setup.codebook, setup.train.mode);
                const auto preds = predict_dataset(dec, split.heldout, default_method(setup.train.mode),
                                                   plan.sim.max_lane_points);
                EvalParams ep;
                ep.dt = plan.sim.speed_dt;
                sr.report = evaluate_dataset(preds, split.heldout, ep);
                if (plan.bench) {
                    BenchOptions bo;
                    bo.trials = plan.bench_trials;
                    const auto b = bench_decode(dec, held, bo);
                    sr.ar_ms = b.rows[0].p50_ms;
                    sr.c2f_ms = b.rows[1].p50_ms;
                }
                sr.ok = true;
                say(variant.name + " seed " + std::to_string(seed) + " mean success " + fmt(sr.report.mean(), 4));
            } catch (const NumericError& e) {
                sr.ok = false;
                sr.error = e.what();
                say(variant.name + " seed " + std::to_string(seed) + " FAILED: " + sr.error);
            }
            vr.seeds.push_back(std::move(sr));
        }
        rep.variants.push_back(std::move(vr));
    }
    return rep;
}

}  // namespace langact
