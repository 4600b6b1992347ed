#include "nmt/transformer.hpp"

#include <algorithm>
#include <cmath>

namespace nmt::model {

void ModelConfig::validate() const {
    if (d_model < 1 || d_ffn < 1 || layers < 1 || heads < 1 || max_len < 1 || vocab_size < 1)
        throw ConfigError("model dimensions must be positive");
    if (d_model % heads != 0) throw ConfigError("d_model must be divisible by heads");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("dropout_p must be in [0,1)");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0)
        throw ConfigError("label_smoothing must be in [0,1)");
}

template <typename S>
Mat<S> sinusoidal_positions(int n, int d_model) {
    Mat<S> pe(n, d_model);
    for (int pos = 0; pos < n; ++pos) {
        for (int i = 0; i < d_model; ++i) {
            double angle = pos / std::pow(10000.0, 2.0 * (i / 2) / d_model);
            pe(pos, i) = static_cast<S>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
        }
    }
    return pe;
}

namespace {

template <typename S>
void softmax_rows_inplace(Mat<S>& x) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        S m = x.row(r).maxCoeff();
        Eigen::Array<S, 1, Eigen::Dynamic> e = (x.row(r).array() - m).exp();
        x.row(r) = (e / e.sum()).matrix();
    }
}

template <typename S>
void check_attention_shapes(const Mat<S>& q, const Mat<S>& k, const Mat<S>& v) {
    if (q.cols() != k.cols() || k.rows() != v.rows())
        throw ShapeError("attention shapes disagree");
    if (q.cols() < 1) throw ShapeError("attention needs at least one feature");
}

}  // namespace

template <typename S>
AttentionResult<S> standard_attention(const Mat<S>& q, const Mat<S>& k, const Mat<S>& v) {
    check_attention_shapes(q, k, v);
    Mat<S> scores = (q * k.transpose()) / static_cast<S>(std::sqrt(static_cast<double>(q.cols())));
    softmax_rows_inplace(scores);
    return {scores * v, scores};
}

template <typename S>
AttentionResult<S> masked_attention(const Mat<S>& q, const Mat<S>& k, const Mat<S>& v,
                                    const augment::MaskPair& masks, S s1, S s2) {
    check_attention_shapes(q, k, v);
    Mat<S> scores = (q * k.transpose()) / static_cast<S>(std::sqrt(static_cast<double>(q.cols())));
    if (static_cast<std::size_t>(scores.rows()) != masks.n ||
        static_cast<std::size_t>(scores.cols()) != masks.n)
        throw ShapeError("mask size does not match attention scores");
    const double p1 = std::min(std::exp(static_cast<double>(s1)), kPenaltyCap);
    const double p2 = std::min(std::exp(static_cast<double>(s2)), kPenaltyCap);
    for (std::size_t i = 0; i < masks.n; ++i)
        for (std::size_t j = 0; j < masks.n; ++j) {
            double pen = p1 * masks.at1(i, j) + p2 * masks.at2(i, j);
            if (pen != 0.0)
                scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -=
                    static_cast<S>(pen);
        }
    softmax_rows_inplace(scores);
    return {scores * v, scores};
}

template <typename S>
Mat<S> scalenorm(const Mat<S>& x, S gain) {
    Mat<S> y(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        S n = x.row(r).norm();
        y.row(r) = gain * x.row(r) / std::max(n, static_cast<S>(kNormEps));
    }
    return y;
}

template <typename S>
Model<S>::Model(ModelConfig cfg, Vocab vocab, std::uint64_t seed)
    : cfg_(cfg), vocab_(std::move(vocab)) {
    cfg_.vocab_size = vocab_.size();
    cfg_.validate();
    positions_ = sinusoidal_positions<S>(cfg_.max_len, cfg_.d_model);

    Rng rng(seed);
    const S gain_init = static_cast<S>(std::sqrt(static_cast<double>(cfg_.d_model)));

    // Embedding rows are normalized on lookup; a unit-scale normal draw keeps
    // every row safely away from the epsilon guard.
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(cfg_.d_model)));
    Mat<S> emb(cfg_.vocab_size, cfg_.d_model);
    for (Eigen::Index i = 0; i < emb.rows(); ++i)
        for (Eigen::Index j = 0; j < emb.cols(); ++j) emb(i, j) = static_cast<S>(normal(rng));
    params_.push_back(std::make_unique<Param>("emb", std::move(emb)));
    emb_ = params_.back().get();

    Mat<S> g1(1, 1);
    g1(0, 0) = gain_init;
    params_.push_back(std::make_unique<Param>("fixnorm.g", g1));
    fixnorm_gain_ = params_.back().get();

    for (int l = 0; l < cfg_.layers; ++l) {
        std::string p = "enc." + std::to_string(l);
        EncLayer layer;
        layer.attn = make_attn(p + ".self", rng);
        layer.ffn = make_ffn(p + ".ffn", rng);
        params_.push_back(std::make_unique<Param>(p + ".mask_s", Mat<S>::Zero(2, cfg_.heads)));
        layer.mask_s = params_.back().get();
        enc_layers_.push_back(layer);
    }
    params_.push_back(std::make_unique<Param>("enc.norm.final", g1));
    enc_final_gain_ = params_.back().get();

    for (int l = 0; l < cfg_.layers; ++l) {
        std::string p = "dec." + std::to_string(l);
        DecLayer layer;
        layer.self = make_attn(p + ".self", rng);
        layer.cross = make_attn(p + ".cross", rng);
        layer.ffn = make_ffn(p + ".ffn", rng);
        dec_layers_.push_back(layer);
    }
    params_.push_back(std::make_unique<Param>("dec.norm.final", g1));
    dec_final_gain_ = params_.back().get();
}

template <typename S>
autodiff::Parameter<S>* Model<S>::make_param(const std::string& name, int rows, int cols, Rng& rng,
                                             bool xavier) {
    Mat<S> m = Mat<S>::Zero(rows, cols);
    if (xavier) {
        double limit = std::sqrt(6.0 / (rows + cols));
        std::uniform_real_distribution<double> uni(-limit, limit);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<S>(uni(rng));
    }
    params_.push_back(std::make_unique<Param>(name, std::move(m)));
    return params_.back().get();
}

template <typename S>
typename Model<S>::AttnW Model<S>::make_attn(const std::string& prefix, Rng& rng) {
    AttnW w;
    for (int h = 0; h < cfg_.heads; ++h) {
        std::string hp = prefix + ".h" + std::to_string(h);
        w.heads.push_back({make_param(hp + ".wq", cfg_.d_model, cfg_.d_head(), rng, true),
                           make_param(hp + ".wk", cfg_.d_model, cfg_.d_head(), rng, true),
                           make_param(hp + ".wv", cfg_.d_model, cfg_.d_head(), rng, true),
                           make_param(hp + ".wo", cfg_.d_head(), cfg_.d_model, rng, true)});
    }
    w.bo = make_param(prefix + ".bo", 1, cfg_.d_model, rng, false);
    w.norm_gain = make_param(prefix + ".norm", 1, 1, rng, false);
    w.norm_gain->value(0, 0) = static_cast<S>(std::sqrt(static_cast<double>(cfg_.d_model)));
    return w;
}

template <typename S>
typename Model<S>::FfnW Model<S>::make_ffn(const std::string& prefix, Rng& rng) {
    FfnW w;
    w.w1 = make_param(prefix + ".w1", cfg_.d_model, cfg_.d_ffn, rng, true);
    w.b1 = make_param(prefix + ".b1", 1, cfg_.d_ffn, rng, false);
    w.w2 = make_param(prefix + ".w2", cfg_.d_ffn, cfg_.d_model, rng, true);
    w.b2 = make_param(prefix + ".b2", 1, cfg_.d_model, rng, false);
    w.norm_gain = make_param(prefix + ".norm", 1, 1, rng, false);
    w.norm_gain->value(0, 0) = static_cast<S>(std::sqrt(static_cast<double>(cfg_.d_model)));
    return w;
}

template <typename S>
int Model<S>::dropout(Graph& g, int x, bool train, Rng& rng) {
    if (!train || cfg_.dropout_p <= 0.0) return x;
    const auto& v = g.value(x);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const S keep_scale = static_cast<S>(1.0 / (1.0 - cfg_.dropout_p));
    Mat<S> mask(v.rows(), v.cols());
    for (Eigen::Index i = 0; i < v.rows(); ++i)
        for (Eigen::Index j = 0; j < v.cols(); ++j)
            mask(i, j) = uni(rng) < cfg_.dropout_p ? S(0) : keep_scale;
    return g.hadamard_const(x, std::move(mask));
}

template <typename S>
int Model<S>::prenorm(Graph& g, int x, Param* gain) {
    return g.scale_by_scalar(g.normalize_rows(x, static_cast<S>(kNormEps)), g.param(*gain));
}

template <typename S>
int Model<S>::build_embedding(Graph& g) {
    int e = g.normalize_rows(g.param(*emb_), static_cast<S>(kNormEps));
    return g.scale_by_scalar(e, g.param(*fixnorm_gain_));
}

template <typename S>
int Model<S>::attention_block(Graph& g, int x, int kv, const AttnW& w,
                              const augment::MaskPair* enc_masks, Param* mask_s,
                              const Mat<S>* extra_penalty, bool train, Rng& rng,
                              AttnCapture<S>* capture) {
    const S inv_sqrt_d = static_cast<S>(1.0 / std::sqrt(static_cast<double>(cfg_.d_head())));
    int xn = prenorm(g, x, w.norm_gain);
    int kvn = kv < 0 ? xn : kv;
    int mask_s_node = enc_masks ? g.param(*mask_s) : -1;

    int out = -1;
    for (int h = 0; h < cfg_.heads; ++h) {
        const HeadW& hw = w.heads[static_cast<std::size_t>(h)];
        int q = g.matmul(xn, g.param(*hw.wq));
        int k = g.matmul(kvn, g.param(*hw.wk));
        int v = g.matmul(kvn, g.param(*hw.wv));
        int scores = g.scale(g.matmul_nt(q, k), inv_sqrt_d);
        if (enc_masks) {
            scores = g.sub_mask_penalty(scores, *enc_masks, g.cell(mask_s_node, 0, h),
                                        g.cell(mask_s_node, 1, h), kPenaltyCap);
        }
        if (extra_penalty) scores = g.add_const(scores, *extra_penalty);
        int alpha = g.softmax_rows(scores);
        if (capture) capture->alphas.push_back(g.value(alpha));
        alpha = dropout(g, alpha, train, rng);
        int head_out = g.matmul(g.matmul(alpha, v), g.param(*hw.wo));
        out = out < 0 ? head_out : g.add(out, head_out);
    }
    out = g.add_rowvec(out, g.param(*w.bo));
    out = dropout(g, out, train, rng);
    return g.add(x, out);
}

template <typename S>
int Model<S>::ffn_block(Graph& g, int x, const FfnW& w, bool train, Rng& rng) {
    int xn = prenorm(g, x, w.norm_gain);
    int h1 = g.relu(g.add_rowvec(g.matmul(xn, g.param(*w.w1)), g.param(*w.b1)));
    h1 = dropout(g, h1, train, rng);
    int h2 = g.add_rowvec(g.matmul(h1, g.param(*w.w2)), g.param(*w.b2));
    h2 = dropout(g, h2, train, rng);
    return g.add(x, h2);
}

template <typename S>
int Model<S>::build_encode(Graph& g, int emb_n, const EncInput& input, bool train, Rng& rng,
                           AttnCapture<S>* capture) {
    const std::size_t n = input.ids.size();
    if (n == 0 || static_cast<int>(n) > cfg_.max_len)
        throw LengthError("encoder input length " + std::to_string(n));
    for (int id : input.ids)
        if (id < 0 || id >= cfg_.vocab_size) throw VocabError("token id out of range");
    if (input.masks.n != n) throw ShapeError("mask size does not match input length");

    const augment::MaskPair* masks = &input.masks;
    if (ablate_masks_) {
        if (zero_masks_.n != n) zero_masks_ = augment::MaskPair(n);
        masks = &zero_masks_;
    }

    int x = g.rows(emb_n, input.ids);
    x = g.add_const(x, positions_.topRows(static_cast<Eigen::Index>(n)));
    x = dropout(g, x, train, rng);
    for (auto& layer : enc_layers_) {
        x = attention_block(g, x, -1, layer.attn, masks, layer.mask_s, nullptr, train, rng, capture);
        x = ffn_block(g, x, layer.ffn, train, rng);
    }
    return prenorm(g, x, enc_final_gain_);
}

template <typename S>
int Model<S>::build_logits(Graph& g, int emb_n, int enc_states, std::size_t src_eos,
                           const std::vector<int>& tgt_in, bool train, Rng& rng) {
    const std::size_t m = tgt_in.size();
    if (m == 0 || static_cast<int>(m) > cfg_.max_len)
        throw LengthError("decoder input length " + std::to_string(m));
    for (int id : tgt_in)
        if (id < 0 || id >= cfg_.vocab_size) throw VocabError("token id out of range");

    const S neg_inf = -std::numeric_limits<S>::infinity();
    Mat<S> causal = Mat<S>::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < causal.rows(); ++i)
        for (Eigen::Index j = i + 1; j < causal.cols(); ++j) causal(i, j) = neg_inf;

    const Eigen::Index enc_len = g.value(enc_states).rows();
    Mat<S> cross_pen;
    bool use_cross_pen = cfg_.mask_definitions_in_cross_attention &&
                         enc_len > static_cast<Eigen::Index>(src_eos) + 1;
    if (use_cross_pen) {
        cross_pen = Mat<S>::Zero(static_cast<Eigen::Index>(m), enc_len);
        for (Eigen::Index i = 0; i < cross_pen.rows(); ++i)
            for (Eigen::Index j = static_cast<Eigen::Index>(src_eos) + 1; j < enc_len; ++j)
                cross_pen(i, j) = neg_inf;
    }

    int x = g.rows(emb_n, tgt_in);
    x = g.add_const(x, positions_.topRows(static_cast<Eigen::Index>(m)));
    x = dropout(g, x, train, rng);
    for (auto& layer : dec_layers_) {
        x = attention_block(g, x, -1, layer.self, nullptr, nullptr, &causal, train, rng, nullptr);
        x = attention_block(g, x, enc_states, layer.cross, nullptr, nullptr,
                            use_cross_pen ? &cross_pen : nullptr, train, rng, nullptr);
        x = ffn_block(g, x, layer.ffn, train, rng);
    }
    x = prenorm(g, x, dec_final_gain_);
    return g.matmul_nt(x, emb_n);  // tied output projection
}

template <typename S>
typename Model<S>::LossBuild Model<S>::build_loss(Graph& g, const EncInput& input,
                                                  const std::vector<int>& tgt_full, bool train,
                                                  Rng& rng) {
    if (tgt_full.size() < 2) throw LengthError("target needs at least <bos> and one token");
    std::vector<int> tgt_in(tgt_full.begin(), tgt_full.end() - 1);
    std::vector<int> gold(tgt_full.begin() + 1, tgt_full.end());

    int emb_n = build_embedding(g);
    int enc = build_encode(g, emb_n, input, train, rng, nullptr);
    int logits = build_logits(g, emb_n, enc, input.eos_index, tgt_in, train, rng);

    int n_tokens = 0;
    for (int t : gold)
        if (t != Vocab::kPad) ++n_tokens;
    int loss = g.label_smoothed_nll(logits, std::move(gold),
                                    static_cast<S>(cfg_.label_smoothing), Vocab::kPad);
    return {loss, n_tokens};
}

template <typename S>
S Model<S>::loss_value(const EncInput& input, const std::vector<int>& tgt_full) {
    Graph g;
    Rng rng(0);
    auto built = build_loss(g, input, tgt_full, /*train=*/false, rng);
    return g.value(built.loss_node)(0, 0);
}

template <typename S>
Mat<S> Model<S>::encode_states(const EncInput& input, AttnCapture<S>* capture) {
    Graph g;
    Rng rng(0);
    int emb_n = build_embedding(g);
    int enc = build_encode(g, emb_n, input, /*train=*/false, rng, capture);
    return g.value(enc);
}

template <typename S>
Eigen::RowVectorX<S> Model<S>::next_token_logprobs(const Mat<S>& enc_states, std::size_t src_eos,
                                                   const std::vector<int>& tgt_in) {
    Graph g;
    Rng rng(0);
    int emb_n = build_embedding(g);
    int enc = g.constant(enc_states);
    int logits = build_logits(g, emb_n, enc, src_eos, tgt_in, /*train=*/false, rng);
    Eigen::RowVectorX<S> row = g.value(logits).row(g.value(logits).rows() - 1);
    S m = row.maxCoeff();
    S lse = std::log((row.array() - m).exp().sum()) + m;
    return (row.array() - lse).matrix();
}

template <typename S>
std::vector<autodiff::Parameter<S>*> Model<S>::parameters() {
    std::vector<Param*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

template <typename S>
autodiff::Parameter<S>* Model<S>::find_parameter(const std::string& name) {
    for (auto& p : params_)
        if (p->name == name) return p.get();
    return nullptr;
}

template <typename S>
Heatmap<S> attention_heatmap(Model<S>& model, const augment::AugmentedExample& example) {
    typename Model<S>::EncInput input{model.vocab().encode(example.tokens),
                                      augment::build_masks(example), example.eos_index};
    AttnCapture<S> capture;
    model.encode_states(input, &capture);
    Heatmap<S> heat;
    heat.labels = example.tokens;
    const auto n = static_cast<Eigen::Index>(example.size());
    heat.scores = Mat<S>::Zero(n, n);
    for (const auto& alpha : capture.alphas) heat.scores += alpha;
    return heat;
}

template <typename S>
std::vector<int> beam_search(Model<S>& model, const typename Model<S>::EncInput& input,
                             int beam_size, int max_steps) {
    struct Hyp {
        std::vector<int> ids;
        double logp = 0.0;
        double normalized() const {
            return logp / static_cast<double>(std::max<std::size_t>(ids.size() - 1, 1));
        }
    };
    Mat<S> enc = model.encode_states(input);
    std::vector<Hyp> alive{Hyp{{Vocab::kBos}, 0.0}};
    std::vector<Hyp> finished;

    for (int step = 0; step < max_steps && !alive.empty(); ++step) {
        std::vector<Hyp> candidates;
        for (const auto& hyp : alive) {
            Eigen::RowVectorX<S> lp = model.next_token_logprobs(enc, input.eos_index, hyp.ids);
            std::vector<int> order(static_cast<std::size_t>(lp.size()));
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return lp(a) > lp(b); });
            int taken = 0;
            for (int tok : order) {
                if (tok == Vocab::kPad || tok == Vocab::kBos) continue;
                Hyp next{hyp.ids, hyp.logp + static_cast<double>(lp(tok))};
                next.ids.push_back(tok);
                candidates.push_back(std::move(next));
                if (++taken >= beam_size) break;
            }
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Hyp& a, const Hyp& b) { return a.logp > b.logp; });
        if (candidates.size() > static_cast<std::size_t>(beam_size)) candidates.resize(static_cast<std::size_t>(beam_size));
        alive.clear();
        for (auto& c : candidates) {
            if (c.ids.back() == Vocab::kEos)
                finished.push_back(std::move(c));
            else
                alive.push_back(std::move(c));
        }
    }
    const std::vector<Hyp>& pool = finished.empty() ? alive : finished;
    if (pool.empty()) return {};
    const Hyp* best = &pool[0];
    for (const auto& h : pool)
        if (h.normalized() > best->normalized()) best = &h;

    std::vector<int> out(best->ids.begin() + 1, best->ids.end());
    if (!out.empty() && out.back() == Vocab::kEos) out.pop_back();
    return out;
}

template Mat<float> sinusoidal_positions<float>(int, int);
template Mat<double> sinusoidal_positions<double>(int, int);
template AttentionResult<float> standard_attention<float>(const Mat<float>&, const Mat<float>&,
                                                          const Mat<float>&);
template AttentionResult<double> standard_attention<double>(const Mat<double>&, const Mat<double>&,
                                                            const Mat<double>&);
template AttentionResult<float> masked_attention<float>(const Mat<float>&, const Mat<float>&,
                                                        const Mat<float>&, const augment::MaskPair&,
                                                        float, float);
template AttentionResult<double> masked_attention<double>(const Mat<double>&, const Mat<double>&,
                                                          const Mat<double>&,
                                                          const augment::MaskPair&, double, double);
template Mat<float> scalenorm<float>(const Mat<float>&, float);
template Mat<double> scalenorm<double>(const Mat<double>&, double);
template class Model<float>;
template class Model<double>;
template Heatmap<float> attention_heatmap<float>(Model<float>&, const augment::AugmentedExample&);
template Heatmap<double> attention_heatmap<double>(Model<double>&,
                                                   const augment::AugmentedExample&);
template std::vector<int> beam_search<float>(Model<float>&, const Model<float>::EncInput&, int,
                                             int);
template std::vector<int> beam_search<double>(Model<double>&, const Model<double>::EncInput&, int,
                                              int);

}  // namespace nmt::model
