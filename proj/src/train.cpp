#include "langact/train.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "langact/errors.hpp"
#include "langact/synth_world.hpp"
#include "yaml_config.hpp"

namespace langact {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::string_view mode_name(TrainMode m) { return m == TrainMode::kAutoregressive ? "ar" : "c2f"; }

TrainMode parse_mode(std::string_view s) {
    if (s == "ar") return TrainMode::kAutoregressive;
    if (s == "c2f") return TrainMode::kCoarseToFine;
    throw UsageError("unknown training mode '" + std::string(s) + "' (expected ar or c2f)");
}

void TrainConfig::validate() const {
    if (epochs < 0) throw UsageError("epochs must be >= 0");
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    if (!(lr > 0.0)) throw UsageError("lr must be > 0");
    if (!(understanding_prob >= 0.0 && understanding_prob <= 1.0)) {
        throw UsageError("understanding_prob must be in [0, 1]");
    }
    if (!(ar_aux_prob >= 0.0 && ar_aux_prob <= 1.0)) throw UsageError("ar_aux_prob must be in [0, 1]");
    if (!(warmup_frac >= 0.0 && warmup_frac < 1.0)) throw UsageError("warmup_frac must be in [0, 1)");
    soft.validate();
}

namespace detail {

void read_model(const YAML::Node& n, ModelConfig& c) {
    read_key(n, "d_model", c.d_model);
    read_key(n, "n_layers", c.n_layers);
    read_key(n, "n_heads", c.n_heads);
    read_key(n, "d_ff", c.d_ff);
    read_key(n, "max_seq_len", c.max_seq_len);
    read_key(n, "dropout", c.dropout);
    read_key(n, "lambda", c.lambda);
    read_key(n, "tie_embeddings", c.tie_embeddings);
}

void read_train(const YAML::Node& n, TrainConfig& c) {
    if (n && n["mode"]) c.mode = parse_mode(n["mode"].as<std::string>());
    read_key(n, "epochs", c.epochs);
    read_key(n, "batch_size", c.batch_size);
    read_key(n, "lr", c.lr);
    read_key(n, "min_lr_frac", c.min_lr_frac);
    read_key(n, "warmup_frac", c.warmup_frac);
    read_key(n, "weight_decay", c.weight_decay);
    read_key(n, "beta1", c.beta1);
    read_key(n, "beta2", c.beta2);
    read_key(n, "eps", c.eps);
    read_key(n, "grad_clip", c.grad_clip);
    read_key(n, "understanding_prob", c.understanding_prob);
    read_key(n, "ar_aux_prob", c.ar_aux_prob);
    read_key(n, "heldout_eval", c.heldout_eval);
    read_key(n, "seed", c.seed);
    read_key(n, "sigma", c.soft.sigma);
    read_key(n, "radius", c.soft.radius);
    if (n && n["soft"]) {
        read_key(n["soft"], "sigma", c.soft.sigma);
        read_key(n["soft"], "radius", c.soft.radius);
    }
}

}  // namespace detail

namespace {

YAML::Node load_yaml(const std::string& path, const char* what) {
    try {
        return YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw DataError(std::string("cannot read ") + what + " '" + path + "': " + e.what());
    }
}

}  // namespace

TrainConfig TrainConfig::load(const std::string& path) {
    const auto doc = load_yaml(path, "train config");
    TrainConfig c;
    try {
        detail::read_train(doc, c);
    } catch (const YAML::Exception& e) {
        throw DataError("bad value in '" + path + "': " + e.what());
    }
    return c;
}

ModelConfig load_model_config(const std::string& path, ModelConfig base) {
    const auto doc = load_yaml(path, "model config");
    try {
        detail::read_model(doc, base);
    } catch (const YAML::Exception& e) {
        throw DataError("bad value in '" + path + "': " + e.what());
    }
    return base;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"mode", mode_name(c.mode)},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"min_lr_frac", c.min_lr_frac},
            {"warmup_frac", c.warmup_frac},
            {"weight_decay", c.weight_decay},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps},
            {"grad_clip", c.grad_clip},
            {"understanding_prob", c.understanding_prob},
            {"ar_aux_prob", c.ar_aux_prob},
            {"heldout_eval", c.heldout_eval},
            {"seed", c.seed},
            {"sigma", c.soft.sigma},
            {"radius", c.soft.radius}};
}

nlohmann::json to_json(const EpochMetrics& m) {
    return {{"epoch", m.epoch},          {"steps", m.steps},
            {"train_gen", m.train_gen},  {"train_und", m.train_und},
            {"heldout_gen", m.heldout_gen}, {"heldout_und", m.heldout_und},
            {"grad_norm", m.grad_norm},  {"clipped_frac", m.clipped_frac},
            {"lr", m.lr},                {"seconds", m.seconds}};
}

EncodedSample encode_sample(const Sample& s, const Codebook& cb, int max_lane_points) {
    EncodedSample e;
    e.v = scene_to_tokens(s.scene, cb, max_lane_points);
    e.l = cb.encode_text(s.instruction);
    e.a = ActionBlock::tokenize(s.dreamer_path, s.dreamer_speed_wps, cb.grid());
    e.cls = s.cls;
    return e;
}

std::vector<EncodedSample> encode_samples(std::span<const Sample> s, const Codebook& cb, int max_lane_points) {
    std::vector<EncodedSample> out;
    out.reserve(s.size());
    for (const auto& x : s) out.push_back(encode_sample(x, cb, max_lane_points));
    return out;
}

Split split_dataset(std::vector<Sample> samples, std::size_t heldout) {
    if (heldout >= samples.size()) {
        throw UsageError("held-out size must be smaller than the dataset");
    }
    Split sp;
    const auto cut = static_cast<std::ptrdiff_t>(samples.size() - heldout);
    sp.heldout.assign(std::make_move_iterator(samples.begin() + cut), std::make_move_iterator(samples.end()));
    samples.resize(static_cast<std::size_t>(cut));
    sp.train = std::move(samples);
    return sp;
}

std::vector<TokenSequence> epoch_sequences(const EncodedSample& s, TrainMode mode, bool und, bool aux,
                                           double lambda, const Codebook& cb) {
    std::vector<TokenSequence> out;
    if (und) {
        // Understanding rows carry zero weight at lambda == 0; skip the work.
        if (lambda > 0.0) out.push_back(build_understanding_sample(s.v, s.l, s.a, cb));
        return out;
    }
    if (mode == TrainMode::kAutoregressive) {
        out.push_back(build_generation_sample(s.v, s.l, s.a, ActionOrder::kNatural, cb));
        return out;
    }
    out.push_back(build_refinement_sample(s.v, s.l, s.a, cb));
    out.push_back(build_endpoint_probe(s.v, s.l, s.a, cb));
    if (aux) out.push_back(build_generation_sample(s.v, s.l, s.a, ActionOrder::kEndpointFirst, cb));
    return out;
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Weight decay applies to 2-D tables only (not gains or biases).
std::vector<std::uint8_t> decay_mask(const ParamLayout& layout) {
    std::vector<std::uint8_t> m(layout.total, 0);
    for (const auto& [name, slot] : layout.named()) {
        if (slot.rows > 1 && slot.cols > 1) {
            std::fill_n(m.begin() + static_cast<std::ptrdiff_t>(slot.offset), slot.size(), 1);
        }
    }
    return m;
}

double schedule(const TrainConfig& c, long long step, long long total) {
    const auto warm = static_cast<long long>(std::ceil(c.warmup_frac * static_cast<double>(total)));
    if (step < warm) {
        return c.lr * static_cast<double>(step + 1) / static_cast<double>(warm);
    }
    const double span = static_cast<double>(std::max(1LL, total - warm));
    const double prog = std::clamp(static_cast<double>(step - warm) / span, 0.0, 1.0);
    const double floor = c.min_lr_frac * c.lr;
    return floor + 0.5 * (c.lr - floor) * (1.0 + std::cos(M_PI * prog));
}

}  // namespace

std::pair<double, double> heldout_losses(const ModelParameters<float>& p, TrainMode mode,
                                         std::span<const EncodedSample> data, const SoftTargetTable& table,
                                         const Codebook& cb) {
    Transformer<float> net(p);
    double gen = 0.0, und = 0.0;
    long long ng = 0, nu = 0;
    constexpr std::size_t kChunk = 16;
    std::vector<TokenSequence> seqs;
    auto flush = [&]() {
        if (seqs.empty()) return;
        std::vector<const TokenSequence*> ptrs;
        for (const auto& s : seqs) ptrs.push_back(&s);
        const auto lb = net.loss(ptrs, table, 1.0, nullptr, 0);
        gen += lb.generation * lb.n_generation;
        und += lb.understanding * lb.n_understanding;
        ng += lb.n_generation;
        nu += lb.n_understanding;
        seqs.clear();
    };
    for (const auto& s : data) {
        for (auto& q : epoch_sequences(s, mode, false, false, 1.0, cb)) seqs.push_back(std::move(q));
        seqs.push_back(build_understanding_sample(s.v, s.l, s.a, cb));
        if (seqs.size() >= kChunk) flush();
    }
    flush();
    return {ng ? gen / static_cast<double>(ng) : 0.0, nu ? und / static_cast<double>(nu) : 0.0};
}

TrainResult train(const ModelConfig& model, const TrainConfig& cfg, std::span<const EncodedSample> data,
                  std::span<const EncodedSample> heldout, const Codebook& cb, const EpochCallback& on_epoch) {
    cfg.validate();
    model.validate();
    if (data.empty()) {
        throw DataError("training set is empty");
    }
    TrainResult res;
    res.params = ModelParameters<float>::init(model, cfg.seed);
    if (cfg.epochs == 0) {
        return res;
    }
    auto& p = res.params;
    const SoftTargetTable table(cfg.soft, cb.grid());
    const auto wd_mask = decay_mask(p.layout);
    const std::size_t n_params = p.values.size();
    ParamVec<float> m(n_params, 0.0f), v(n_params, 0.0f), grad(n_params, 0.0f);

    const auto per_epoch = static_cast<long long>((data.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                                  static_cast<std::size_t>(cfg.batch_size));
    const long long total_steps = per_epoch * cfg.epochs;
    std::mt19937_64 rng(mix64(cfg.seed ^ 0xda7aULL));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::span<const EncodedSample> eval_set =
        heldout.subspan(0, std::min<std::size_t>(heldout.size(), static_cast<std::size_t>(std::max(0, cfg.heldout_eval))));

    std::vector<std::size_t> order(data.size());
    long long step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        double sum_gen = 0.0, sum_und = 0.0;
        double sum_norm = 0.0;
        long long n_clipped = 0, n_steps = 0;
        long long n_gen = 0, n_und = 0;
        double lr = 0.0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
            std::vector<TokenSequence> seqs;
            for (std::size_t i = b0; i < b1; ++i) {
                // Both draws are taken for every sample so data order does not depend on lambda.
                const bool und = unit(rng) < cfg.understanding_prob;
                const bool aux = unit(rng) < cfg.ar_aux_prob;
                for (auto& q : epoch_sequences(data[order[i]], cfg.mode, und, aux, model.lambda, cb)) {
                    seqs.push_back(std::move(q));
                }
            }
            lr = schedule(cfg, step, total_steps);
            if (seqs.empty()) {
                std::fill(grad.begin(), grad.end(), 0.0f);
            } else {
                std::vector<const TokenSequence*> ptrs;
                for (const auto& s : seqs) ptrs.push_back(&s);
                Transformer<float> net(p);
                LossBreakdown lb;
                const std::uint64_t dseed = model.dropout > 0.0 ? (mix64(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(step)) | 1ULL) : 0;
                try {
                    lb = net.loss(ptrs, table, model.lambda, &grad, dseed);
                } catch (const NumericError& e) {
                    throw NumericError("training diverged at epoch " + std::to_string(epoch) + " step " +
                                       std::to_string(step) + ": " + e.what());
                }
                if (!std::isfinite(lb.total)) {
                    throw NumericError("training diverged at epoch " + std::to_string(epoch) + " step " +
                                       std::to_string(step) + ": loss is not finite");
                }
                sum_gen += lb.generation * lb.n_generation;
                sum_und += lb.understanding * lb.n_understanding;
                n_gen += lb.n_generation;
                n_und += lb.n_understanding;
            }
            double norm2 = 0.0;
            for (float g : grad) norm2 += static_cast<double>(g) * g;
            if (!std::isfinite(norm2)) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + " step " +
                                   std::to_string(step) + ": gradient is not finite");
            }
            const double norm = std::sqrt(norm2);
            const double clip = (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) ? cfg.grad_clip / norm : 1.0;
            sum_norm += norm;
            n_clipped += clip < 1.0;
            ++n_steps;
            const double t = static_cast<double>(step + 1);
            const double bc1 = 1.0 - std::pow(cfg.beta1, t);
            const double bc2 = 1.0 - std::pow(cfg.beta2, t);
            const auto b1f = static_cast<float>(cfg.beta1), b2f = static_cast<float>(cfg.beta2);
            const auto lrf = static_cast<float>(lr), wdf = static_cast<float>(lr * cfg.weight_decay);
            const auto clipf = static_cast<float>(clip);
            const auto c1 = static_cast<float>(1.0 / bc1), c2 = static_cast<float>(1.0 / bc2);
            const auto epsf = static_cast<float>(cfg.eps);
            for (std::size_t k = 0; k < n_params; ++k) {
                const float g = grad[k] * clipf;
                m[k] = b1f * m[k] + (1.0f - b1f) * g;
                v[k] = b2f * v[k] + (1.0f - b2f) * g * g;
                float upd = lrf * (m[k] * c1) / (std::sqrt(v[k] * c2) + epsf);
                if (wd_mask[k]) upd += wdf * p.values[k];
                p.values[k] -= upd;
            }
            ++step;
        }
        EpochMetrics em;
        em.epoch = epoch;
        em.steps = static_cast<int>(step);
        em.train_gen = n_gen ? sum_gen / static_cast<double>(n_gen) : 0.0;
        em.train_und = n_und ? sum_und / static_cast<double>(n_und) : 0.0;
        em.lr = lr;
        em.grad_norm = n_steps ? sum_norm / n_steps : 0.0;
        em.clipped_frac = n_steps ? static_cast<double>(n_clipped) / n_steps : 0.0;
        if (!eval_set.empty()) {
            std::tie(em.heldout_gen, em.heldout_und) = heldout_losses(p, cfg.mode, eval_set, table, cb);
        }
        em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.log.push_back(em);
        if (on_epoch) on_epoch(em);
    }
    res.total_steps = step;
    return res;
}

// ---- checkpoints ----

namespace {

constexpr char kMagic[8] = {'L', 'A', 'N', 'G', 'A', 'C', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a_bytes(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

template <typename U>
void put(std::string& out, U v) {
    char buf[sizeof(U)];
    std::memcpy(buf, &v, sizeof(U));
    out.append(buf, sizeof(U));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    template <typename U>
    U get() {
        if (pos + sizeof(U) > buf.size()) throw DataError("checkpoint is truncated");
        U v;
        std::memcpy(&v, buf.data() + pos, sizeof(U));
        pos += sizeof(U);
        return v;
    }
    std::string bytes(std::size_t n) {
        if (pos + n > buf.size()) throw DataError("checkpoint is truncated");
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelParameters<float>& p, TrainMode mode,
                     std::uint64_t codebook_hash, const nlohmann::json& train_meta) {
    nlohmann::json meta = {{"model", to_json(p.config)}, {"mode", mode_name(mode)}};
    if (!train_meta.is_null()) meta["train"] = train_meta;
    const std::string meta_s = meta.dump();
    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, sizeof(float));
    put<std::uint64_t>(out, meta_s.size());
    out += meta_s;
    put<std::uint64_t>(out, codebook_hash);
    put<std::uint64_t>(out, p.values.size());
    out.append(reinterpret_cast<const char*>(p.values.data()), p.values.size() * sizeof(float));
    put<std::uint64_t>(out, fnv1a_bytes(out));
    std::ofstream f(path, std::ios::binary);
    if (!f || !f.write(out.data(), static_cast<std::streamsize>(out.size()))) {
        throw DataError("cannot write checkpoint '" + path + "'");
    }
}

Checkpoint load_checkpoint(const std::string& path, std::uint64_t expected_hash, const ModelConfig* expected_config) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    const std::string buf = ss.str();
    Reader r{buf};
    if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
        throw DataError("'" + path + "' is not a checkpoint (bad magic)");
    }
    if (const auto ver = r.get<std::uint32_t>(); ver != kVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(ver));
    }
    if (r.get<std::uint32_t>() != sizeof(float)) throw DataError("checkpoint scalar type is not f32");
    const auto meta_len = r.get<std::uint64_t>();
    if (meta_len > buf.size()) throw DataError("checkpoint is truncated");
    const std::string meta_s = r.bytes(static_cast<std::size_t>(meta_len));
    const auto hash = r.get<std::uint64_t>();
    const auto count = r.get<std::uint64_t>();
    if (count > buf.size() / sizeof(float)) throw DataError("checkpoint is truncated");
    const std::string raw = r.bytes(static_cast<std::size_t>(count) * sizeof(float));
    const std::size_t body_end = r.pos;
    const auto checksum = r.get<std::uint64_t>();
    if (r.pos != buf.size()) throw DataError("checkpoint has trailing bytes");
    if (fnv1a_bytes(buf.substr(0, body_end)) != checksum) throw DataError("checkpoint checksum mismatch (corrupt file)");
    if (hash != expected_hash) throw DataError("checkpoint was trained with a different codebook (hash mismatch)");

    Checkpoint ck;
    ck.codebook_hash = hash;
    try {
        ck.meta = nlohmann::json::parse(meta_s);
        ck.params.config = model_config_from_json(ck.meta.at("model"));
        ck.mode = parse_mode(ck.meta.at("mode").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint metadata is malformed: ") + e.what());
    } catch (const UsageError& e) {
        throw DataError(std::string("checkpoint metadata is malformed: ") + e.what());
    }
    if (expected_config != nullptr && !(*expected_config == ck.params.config)) {
        throw DataError("checkpoint config does not match the requested model config");
    }
    try {
        ck.params.layout = ParamLayout::make(ck.params.config);
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("checkpoint config is invalid: ") + e.what());
    }
    if (ck.params.layout.total != count) throw DataError("checkpoint parameter count does not match its config");
    ck.params.values.resize(static_cast<std::size_t>(count));
    std::memcpy(ck.params.values.data(), raw.data(), raw.size());
    for (float x : ck.params.values) {
        if (!std::isfinite(x)) throw DataError("checkpoint contains non-finite parameters");
    }
    return ck;
}

}  // namespace langact
