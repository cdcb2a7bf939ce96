#include "langact/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "langact/errors.hpp"

namespace langact {

void ModelConfig::validate() const {
    if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || max_seq_len <= 0) {
        throw std::invalid_argument("model config: dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
        throw std::invalid_argument("model config: d_model must be divisible by n_heads");
    }
    if (vocab_size <= 0 || action_offset < 0 || k_action <= 0 ||
        action_offset + k_action > vocab_size) {
        throw std::invalid_argument("model config: inconsistent vocabulary segments");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw std::invalid_argument("model config: dropout must be in [0, 1)");
    }
    if (!(lambda >= 0.0)) {
        throw std::invalid_argument("model config: lambda must be >= 0");
    }
}

ModelConfig ModelConfig::for_codebook(const Codebook& cb) {
    ModelConfig c;
    c.vocab_size = cb.size();
    c.action_offset = cb.action_offset();
    c.k_action = cb.k_action();
    return c;
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"d_model", c.d_model},         {"n_layers", c.n_layers},
            {"n_heads", c.n_heads},         {"d_ff", c.d_ff},
            {"max_seq_len", c.max_seq_len}, {"vocab_size", c.vocab_size},
            {"action_offset", c.action_offset}, {"k_action", c.k_action},
            {"dropout", c.dropout},         {"lambda", c.lambda},
            {"tie_embeddings", c.tie_embeddings}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.d_model = j.at("d_model").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.action_offset = j.at("action_offset").get<int>();
    c.k_action = j.at("k_action").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.lambda = j.at("lambda").get<double>();
    c.tie_embeddings = j.value("tie_embeddings", false);
    return c;
}

ParamLayout ParamLayout::make(const ModelConfig& c) {
    c.validate();
    ParamLayout l;
    std::size_t off = 0;
    auto take = [&](std::size_t rows, std::size_t cols) {
        Slot s{off, rows, cols};
        off += rows * cols;
        return s;
    };
    const auto d = static_cast<std::size_t>(c.d_model);
    const auto ff = static_cast<std::size_t>(c.d_ff);
    const auto k = static_cast<std::size_t>(c.vocab_size);
    l.tok_emb = take(k, d);
    l.pos_emb = take(static_cast<std::size_t>(c.max_seq_len), d);
    for (int i = 0; i < c.n_layers; ++i) {
        LayerSlots s;
        s.ln1_g = take(1, d);
        s.ln1_b = take(1, d);
        s.w_qkv = take(d, 3 * d);
        s.b_qkv = take(1, 3 * d);
        s.w_o = take(d, d);
        s.b_o = take(1, d);
        s.ln2_g = take(1, d);
        s.ln2_b = take(1, d);
        s.w_1 = take(d, ff);
        s.b_1 = take(1, ff);
        s.w_2 = take(ff, d);
        s.b_2 = take(1, d);
        l.layers.push_back(s);
    }
    l.lnf_g = take(1, d);
    l.lnf_b = take(1, d);
    l.w_out = c.tie_embeddings ? l.tok_emb : take(k, d);
    l.b_out = take(1, k);
    l.total = off;
    return l;
}

std::vector<std::pair<std::string, Slot>> ParamLayout::named() const {
    std::vector<std::pair<std::string, Slot>> out{{"tok_emb", tok_emb}, {"pos_emb", pos_emb}};
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& s = layers[i];
        const std::string p = "layer" + std::to_string(i) + ".";
        out.insert(out.end(), {{p + "ln1_g", s.ln1_g}, {p + "ln1_b", s.ln1_b},
                               {p + "w_qkv", s.w_qkv}, {p + "b_qkv", s.b_qkv},
                               {p + "w_o", s.w_o},     {p + "b_o", s.b_o},
                               {p + "ln2_g", s.ln2_g}, {p + "ln2_b", s.ln2_b},
                               {p + "w_1", s.w_1},     {p + "b_1", s.b_1},
                               {p + "w_2", s.w_2},     {p + "b_2", s.b_2}});
    }
    out.insert(out.end(), {{"lnf_g", lnf_g}, {"lnf_b", lnf_b}});
    if (w_out.offset != tok_emb.offset) out.emplace_back("w_out", w_out);
    out.emplace_back("b_out", b_out);
    return out;
}

template <typename T>
ModelParameters<T> ModelParameters<T>::init(const ModelConfig& config, std::uint64_t seed) {
    ModelParameters<T> p;
    p.config = config;
    p.layout = ParamLayout::make(config);
    p.values.assign(p.layout.total, T(0));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](const Slot& s, double stddev) {
        for (auto& v : p.slot(s)) {
            v = static_cast<T>(normal(rng) * stddev);
        }
    };
    auto ones = [&](const Slot& s) {
        for (auto& v : p.slot(s)) {
            v = T(1);
        }
    };
    constexpr double kStd = 0.02;
    const double resid_std = kStd / std::sqrt(2.0 * config.n_layers);
    fill(p.layout.tok_emb, kStd);
    fill(p.layout.pos_emb, kStd);
    for (const auto& l : p.layout.layers) {
        ones(l.ln1_g);
        fill(l.w_qkv, kStd);
        fill(l.w_o, resid_std);
        ones(l.ln2_g);
        fill(l.w_1, kStd);
        fill(l.w_2, resid_std);
    }
    ones(p.layout.lnf_g);
    if (!config.tie_embeddings) fill(p.layout.w_out, kStd);
    return p;
}

namespace {

template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstRow = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;
template <typename T>
using MutRow = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;

constexpr double kLnEps = 1e-5;

template <typename T>
ConstMap<T> cmat(const ParamVec<T>& v, const Slot& s) {
    return ConstMap<T>(v.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                       static_cast<Eigen::Index>(s.cols));
}
template <typename T>
MutMap<T> mmat(ParamVec<T>& v, const Slot& s) {
    return MutMap<T>(v.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                     static_cast<Eigen::Index>(s.cols));
}
template <typename T>
ConstRow<T> crow(const ParamVec<T>& v, const Slot& s) {
    return ConstRow<T>(v.data() + s.offset, static_cast<Eigen::Index>(s.size()));
}
template <typename T>
MutRow<T> mrow(ParamVec<T>& v, const Slot& s) {
    return MutRow<T>(v.data() + s.offset, static_cast<Eigen::Index>(s.size()));
}

template <typename T>
void layer_norm(const RowMat<T>& x, const ConstRow<T>& g, const ConstRow<T>& b, RowMat<T>& xhat,
                ColVec<T>& rstd, RowMat<T>& y) {
    const auto n = x.rows();
    xhat.resize(n, x.cols());
    rstd.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const T mu = x.row(r).mean();
        const auto diff = (x.row(r).array() - mu).eval();
        const T var = diff.square().mean();
        const T rs = T(1) / std::sqrt(var + static_cast<T>(kLnEps));
        rstd(r) = rs;
        xhat.row(r) = diff * rs;
    }
    y = (xhat.array().rowwise() * g.array()).rowwise() + b.array();
}

template <typename T>
void layer_norm_backward(const RowMat<T>& dy, const RowMat<T>& xhat, const ColVec<T>& rstd,
                         const ConstRow<T>& g, MutRow<T> dg, MutRow<T> db, RowMat<T>& dx) {
    dg += (dy.array() * xhat.array()).colwise().sum().matrix();
    db += dy.colwise().sum();
    const RowMat<T> dxhat = dy.array().rowwise() * g.array();
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const T m1 = dxhat.row(r).mean();
        const T m2 = (dxhat.row(r).array() * xhat.row(r).array()).mean();
        dx.row(r).array() += rstd(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
    }
}

template <typename T>
T gelu(T x) {
    constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
    return T(0.5) * x * (T(1) + std::tanh(c * (x + T(0.044715) * x * x * x)));
}

template <typename T>
T gelu_grad(T x) {
    constexpr T c = T(0.7978845608028654);
    const T u = c * (x + T(0.044715) * x * x * x);
    const T t = std::tanh(u);
    return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * c * (T(1) + T(3) * T(0.044715) * x * x);
}

template <typename T>
void dropout_mask(RowMat<T>& mask, Eigen::Index rows, Eigen::Index cols, double p,
                  std::mt19937_64& rng) {
    mask.resize(rows, cols);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        mask.data()[i] = u < p ? T(0) : keep_scale;
    }
}

}  // namespace

template <typename T>
void Transformer<T>::forward(std::span<const std::span<const TokenId>> seqs, ForwardCache<T>& cache,
                             std::uint64_t dropout_seed) const {
    const ModelConfig& c = p_.config;
    const ParamLayout& L = p_.layout;
    const auto& v = p_.values;
    const Eigen::Index d = c.d_model;
    const Eigen::Index hd = d / c.n_heads;
    const bool train = dropout_seed != 0 && c.dropout > 0.0;
    std::mt19937_64 rng(dropout_seed);

    cache.offsets.clear();
    cache.lengths.clear();
    cache.ids.clear();
    cache.positions.clear();
    for (const auto& s : seqs) {
        if (s.size() > static_cast<std::size_t>(c.max_seq_len)) {
            throw std::length_error("sequence of length " + std::to_string(s.size()) +
                                    " exceeds max_seq_len " + std::to_string(c.max_seq_len));
        }
        cache.offsets.push_back(cache.ids.size());
        cache.lengths.push_back(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] < 0 || s[i] >= c.vocab_size) {
                throw std::out_of_range("token id outside vocabulary");
            }
            cache.ids.push_back(s[i]);
            cache.positions.push_back(static_cast<int>(i));
        }
    }
    const auto n = static_cast<Eigen::Index>(cache.ids.size());

    RowMat<T> x(n, d);
    const auto tok = cmat(v, L.tok_emb);
    const auto pos = cmat(v, L.pos_emb);
    for (Eigen::Index r = 0; r < n; ++r) {
        x.row(r) = tok.row(cache.ids[static_cast<std::size_t>(r)]) +
                   pos.row(cache.positions[static_cast<std::size_t>(r)]);
    }
    if (train) {
        dropout_mask(cache.mask_emb, n, d, c.dropout, rng);
        x.array() *= cache.mask_emb.array();
    } else {
        cache.mask_emb.resize(0, 0);
    }

    const T scale = T(1) / std::sqrt(static_cast<T>(hd));
    cache.layers.resize(static_cast<std::size_t>(c.n_layers));
    for (int li = 0; li < c.n_layers; ++li) {
        const LayerSlots& s = L.layers[static_cast<std::size_t>(li)];
        LayerCache<T>& lc = cache.layers[static_cast<std::size_t>(li)];

        layer_norm(x, crow(v, s.ln1_g), crow(v, s.ln1_b), lc.xhat1, lc.rstd1, lc.ln1);
        lc.qkv.noalias() = lc.ln1 * cmat(v, s.w_qkv);
        lc.qkv.rowwise() += crow(v, s.b_qkv);

        lc.attn.resize(n, d);
        lc.probs.resize(seqs.size() * static_cast<std::size_t>(c.n_heads));
        for (std::size_t si = 0; si < seqs.size(); ++si) {
            const auto o = static_cast<Eigen::Index>(cache.offsets[si]);
            const auto len = static_cast<Eigen::Index>(cache.lengths[si]);
            if (len == 0) {
                continue;
            }
            for (int h = 0; h < c.n_heads; ++h) {
                const auto q = lc.qkv.block(o, h * hd, len, hd);
                const auto k = lc.qkv.block(o, d + h * hd, len, hd);
                const auto val = lc.qkv.block(o, 2 * d + h * hd, len, hd);
                RowMat<T>& P = lc.probs[si * static_cast<std::size_t>(c.n_heads) + static_cast<std::size_t>(h)];
                P.noalias() = q * k.transpose();
                for (Eigen::Index i = 0; i < len; ++i) {
                    auto row = P.row(i).head(i + 1);
                    row *= scale;
                    const T m = row.maxCoeff();
                    row.array() = (row.array() - m).exp();
                    row /= row.sum();
                    P.row(i).tail(len - i - 1).setZero();
                }
                lc.attn.block(o, h * hd, len, hd).noalias() = P * val;
            }
        }

        RowMat<T> proj = lc.attn * cmat(v, s.w_o);
        proj.rowwise() += crow(v, s.b_o);
        if (train) {
            dropout_mask(lc.mask_attn, n, d, c.dropout, rng);
            proj.array() *= lc.mask_attn.array();
        } else {
            lc.mask_attn.resize(0, 0);
        }
        x += proj;

        layer_norm(x, crow(v, s.ln2_g), crow(v, s.ln2_b), lc.xhat2, lc.rstd2, lc.ln2);
        lc.ff_pre.noalias() = lc.ln2 * cmat(v, s.w_1);
        lc.ff_pre.rowwise() += crow(v, s.b_1);
        lc.ff_act = lc.ff_pre.unaryExpr([](T a) { return gelu(a); });
        RowMat<T> ff = lc.ff_act * cmat(v, s.w_2);
        ff.rowwise() += crow(v, s.b_2);
        if (train) {
            dropout_mask(lc.mask_ff, n, d, c.dropout, rng);
            ff.array() *= lc.mask_ff.array();
        } else {
            lc.mask_ff.resize(0, 0);
        }
        x += ff;
    }
    layer_norm(x, crow(v, L.lnf_g), crow(v, L.lnf_b), cache.xhat_f, cache.rstd_f, cache.hidden);
}

template <typename T>
void Transformer<T>::logits(const ForwardCache<T>& cache, std::size_t row, int lo, int hi,
                            std::vector<T>& out) const {
    const auto& v = p_.values;
    const Eigen::Index d = p_.config.d_model;
    const auto w = ConstMap<T>(v.data() + p_.layout.w_out.offset + static_cast<std::size_t>(lo) * static_cast<std::size_t>(d),
                               hi - lo, d);
    const auto b = ConstRow<T>(v.data() + p_.layout.b_out.offset + static_cast<std::size_t>(lo), hi - lo);
    out.resize(static_cast<std::size_t>(hi - lo));
    MutRow<T> o(out.data(), hi - lo);
    o.noalias() = cache.hidden.row(static_cast<Eigen::Index>(row)) * w.transpose();
    o += b;
}

template <typename T>
RowMat<T> Transformer<T>::all_logits(std::span<const TokenId> seq) const {
    ForwardCache<T> cache;
    const std::span<const TokenId> one[] = {seq};
    forward(one, cache);
    RowMat<T> out = cache.hidden * cmat(p_.values, p_.layout.w_out).transpose();
    out.rowwise() += crow(p_.values, p_.layout.b_out);
    return out;
}

template <typename T>
LossBreakdown Transformer<T>::loss(std::span<const TokenSequence* const> batch,
                                   const SoftTargetTable& targets, double lambda,
                                   ParamVec<T>* grad, std::uint64_t dropout_seed) const {
    if (batch.empty()) {
        throw std::invalid_argument("loss: empty batch");
    }
    const ModelConfig& c = p_.config;
    const auto& v = p_.values;
    const Eigen::Index d = c.d_model;

    std::vector<std::span<const TokenId>> spans;
    spans.reserve(batch.size());
    for (const TokenSequence* s : batch) {
        spans.emplace_back(s->input_ids);
    }
    ForwardCache<T> cache;
    forward(spans, cache, dropout_seed);

    struct SoftRow {
        std::size_t row;
        ActionTokenId center;
    };
    struct HardRow {
        std::size_t row;
        TokenId id;
    };
    std::vector<SoftRow> soft;
    std::vector<HardRow> hard;
    for (std::size_t si = 0; si < batch.size(); ++si) {
        const TokenSequence& s = *batch[si];
        for (std::size_t p = 0; p < s.size(); ++p) {
            if (const auto* t = std::get_if<SoftTarget>(&s.targets[p])) {
                soft.push_back({cache.row(si, p), t->center});
            } else if (const auto* h = std::get_if<HardTarget>(&s.targets[p])) {
                hard.push_back({cache.row(si, p), h->id});
            }
        }
    }
    if (soft.empty() && hard.empty()) {
        throw std::invalid_argument("loss: batch has no supervised positions");
    }

    LossBreakdown out;
    out.n_generation = static_cast<int>(soft.size());
    out.n_understanding = static_cast<int>(hard.size());
    RowMat<T> d_hidden;
    if (grad != nullptr) {
        grad->assign(v.size(), T(0));
        d_hidden = RowMat<T>::Zero(cache.hidden.rows(), d);
    }

    // One masked softmax group: rows scored over vocabulary columns [lo, lo + width).
    auto score_group = [&](auto& rows, int lo, int width, double weight, auto&& target_of) {
        const auto nr = static_cast<Eigen::Index>(rows.size());
        RowMat<T> h(nr, d);
        for (Eigen::Index i = 0; i < nr; ++i) {
            h.row(i) = cache.hidden.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].row));
        }
        const auto w = ConstMap<T>(v.data() + p_.layout.w_out.offset + static_cast<std::size_t>(lo) * static_cast<std::size_t>(d),
                                   width, d);
        const auto b = ConstRow<T>(v.data() + p_.layout.b_out.offset + static_cast<std::size_t>(lo), width);
        RowMat<T> z = h * w.transpose();
        z.rowwise() += b;
        double sum = 0.0;
        for (Eigen::Index i = 0; i < nr; ++i) {
            auto row = z.row(i);
            if (!row.allFinite()) {
                throw NumericError("loss: non-finite logits");
            }
            const T m = row.maxCoeff();
            const T lse = m + std::log((row.array() - m).exp().sum());
            target_of(rows[static_cast<std::size_t>(i)], [&](int col, double q) {
                sum -= q * static_cast<double>(row(col) - lse);
            });
            // Overwrite with dL/dz = softmax - q.
            row.array() = (row.array() - lse).exp();
            target_of(rows[static_cast<std::size_t>(i)],
                      [&](int col, double q) { row(col) -= static_cast<T>(q); });
        }
        if (grad != nullptr && weight != 0.0) {
            z *= static_cast<T>(weight);
            auto gw = MutMap<T>(grad->data() + p_.layout.w_out.offset + static_cast<std::size_t>(lo) * static_cast<std::size_t>(d),
                                width, d);
            auto gb = MutRow<T>(grad->data() + p_.layout.b_out.offset + static_cast<std::size_t>(lo), width);
            gw.noalias() += z.transpose() * h;
            gb += z.colwise().sum();
            const RowMat<T> dh = z * w;
            for (Eigen::Index i = 0; i < nr; ++i) {
                d_hidden.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].row)) += dh.row(i);
            }
        }
        return sum;
    };

    if (!soft.empty()) {
        const double wgen = 1.0 / static_cast<double>(soft.size());
        const double sum = score_group(soft, c.action_offset, c.k_action, wgen,
                                       [&](const SoftRow& r, auto&& visit) {
                                           for (const auto& e : targets[r.center].entries) {
                                               visit(e.id, e.prob);
                                           }
                                       });
        out.generation = sum * wgen;
    }
    if (!hard.empty()) {
        const double wund = lambda / static_cast<double>(hard.size());
        const double sum = score_group(hard, 0, c.vocab_size, wund,
                                       [&](const HardRow& r, auto&& visit) { visit(r.id, 1.0); });
        out.understanding = sum / static_cast<double>(hard.size());
    }
    out.total = out.generation + lambda * out.understanding;
    if (!std::isfinite(out.total)) {
        throw NumericError("loss: non-finite total");
    }
    if (grad != nullptr) {
        backward(cache, d_hidden, *grad);
    }
    return out;
}

template <typename T>
void Transformer<T>::backward(const ForwardCache<T>& cache, const RowMat<T>& d_hidden,
                              ParamVec<T>& grad) const {
    const ModelConfig& c = p_.config;
    const ParamLayout& L = p_.layout;
    const auto& v = p_.values;
    const Eigen::Index d = c.d_model;
    const Eigen::Index hd = d / c.n_heads;
    const auto n = d_hidden.rows();
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));

    RowMat<T> dx = RowMat<T>::Zero(n, d);
    layer_norm_backward(d_hidden, cache.xhat_f, cache.rstd_f, crow(v, L.lnf_g), mrow(grad, L.lnf_g),
                        mrow(grad, L.lnf_b), dx);

    for (int li = c.n_layers - 1; li >= 0; --li) {
        const LayerSlots& s = L.layers[static_cast<std::size_t>(li)];
        const LayerCache<T>& lc = cache.layers[static_cast<std::size_t>(li)];

        // MLP branch.
        RowMat<T> d_ff = dx;
        if (lc.mask_ff.size() > 0) {
            d_ff.array() *= lc.mask_ff.array();
        }
        mmat(grad, s.w_2).noalias() += lc.ff_act.transpose() * d_ff;
        mrow(grad, s.b_2) += d_ff.colwise().sum();
        RowMat<T> d_pre = d_ff * cmat(v, s.w_2).transpose();
        d_pre.array() *= lc.ff_pre.unaryExpr([](T a) { return gelu_grad(a); }).array();
        mmat(grad, s.w_1).noalias() += lc.ln2.transpose() * d_pre;
        mrow(grad, s.b_1) += d_pre.colwise().sum();
        const RowMat<T> d_ln2 = d_pre * cmat(v, s.w_1).transpose();
        RowMat<T> dh = dx;
        layer_norm_backward(d_ln2, lc.xhat2, lc.rstd2, crow(v, s.ln2_g), mrow(grad, s.ln2_g),
                            mrow(grad, s.ln2_b), dh);

        // Attention branch.
        RowMat<T> d_proj = dh;
        if (lc.mask_attn.size() > 0) {
            d_proj.array() *= lc.mask_attn.array();
        }
        mmat(grad, s.w_o).noalias() += lc.attn.transpose() * d_proj;
        mrow(grad, s.b_o) += d_proj.colwise().sum();
        const RowMat<T> d_attn = d_proj * cmat(v, s.w_o).transpose();

        RowMat<T> d_qkv = RowMat<T>::Zero(n, 3 * d);
        for (std::size_t si = 0; si < cache.offsets.size(); ++si) {
            const auto o = static_cast<Eigen::Index>(cache.offsets[si]);
            const auto len = static_cast<Eigen::Index>(cache.lengths[si]);
            if (len == 0) {
                continue;
            }
            for (int h = 0; h < c.n_heads; ++h) {
                const RowMat<T>& P = lc.probs[si * static_cast<std::size_t>(c.n_heads) + static_cast<std::size_t>(h)];
                const auto q = lc.qkv.block(o, h * hd, len, hd);
                const auto k = lc.qkv.block(o, d + h * hd, len, hd);
                const auto val = lc.qkv.block(o, 2 * d + h * hd, len, hd);
                const auto d_o = d_attn.block(o, h * hd, len, hd);
                d_qkv.block(o, 2 * d + h * hd, len, hd).noalias() = P.transpose() * d_o;
                RowMat<T> dS = d_o * val.transpose();
                for (Eigen::Index i = 0; i < len; ++i) {
                    auto prow = P.row(i).head(i + 1);
                    auto drow = dS.row(i).head(i + 1);
                    const T dot = prow.dot(drow);
                    drow.array() = prow.array() * (drow.array() - dot) * scale;
                    dS.row(i).tail(len - i - 1).setZero();
                }
                d_qkv.block(o, h * hd, len, hd).noalias() = dS * k;
                d_qkv.block(o, d + h * hd, len, hd).noalias() = dS.transpose() * q;
            }
        }
        mmat(grad, s.w_qkv).noalias() += lc.ln1.transpose() * d_qkv;
        mrow(grad, s.b_qkv) += d_qkv.colwise().sum();
        const RowMat<T> d_ln1 = d_qkv * cmat(v, s.w_qkv).transpose();
        dx = dh;
        layer_norm_backward(d_ln1, lc.xhat1, lc.rstd1, crow(v, s.ln1_g), mrow(grad, s.ln1_g),
                            mrow(grad, s.ln1_b), dx);
    }

    if (cache.mask_emb.size() > 0) {
        dx.array() *= cache.mask_emb.array();
    }
    auto g_tok = mmat(grad, L.tok_emb);
    auto g_pos = mmat(grad, L.pos_emb);
    for (Eigen::Index r = 0; r < n; ++r) {
        g_tok.row(cache.ids[static_cast<std::size_t>(r)]) += dx.row(r);
        g_pos.row(cache.positions[static_cast<std::size_t>(r)]) += dx.row(r);
    }
}

template struct ModelParameters<float>;
template struct ModelParameters<double>;
template class Transformer<float>;
template class Transformer<double>;

}  // namespace langact
