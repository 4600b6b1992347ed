#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "nmt/augment.hpp"
#include "nmt/autodiff.hpp"
#include "nmt/vocab.hpp"

namespace nmt::model {

struct VocabError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LengthError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFiniteLoss : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

template <typename S>
using Mat = autodiff::Mat<S>;

/// Penalty ceiling on exp(s); keeps extreme strengths from overflowing while
/// still acting as a hard mask (softmax weight < e^-9000 underflows to 0).
inline constexpr double kPenaltyCap = 1e4;

inline constexpr double kNormEps = 1e-6;

struct ModelConfig {
    int d_model = 512;
    int d_ffn = 2048;
    int layers = 6;  // encoder and decoder depth
    int heads = 8;
    double dropout_p = 0.1;
    double label_smoothing = 0.1;
    int vocab_size = 0;
    int max_len = 256;
    // Decoder cross-attention sees the whole augmented sequence by default;
    // setting this hard-masks the definition segment instead.
    bool mask_definitions_in_cross_attention = false;

    void validate() const;
    int d_head() const { return d_model / heads; }
};

/// Sinusoidal position table, rows 0..n-1.
template <typename S>
Mat<S> sinusoidal_positions(int n, int d_model);

template <typename S>
struct AttentionResult {
    Mat<S> output;
    Mat<S> alpha;
};

/// alpha = softmax(Q K^T / sqrt(d)), output = alpha V.
template <typename S>
AttentionResult<S> standard_attention(const Mat<S>& q, const Mat<S>& k, const Mat<S>& v);

/// Soft-masked attention for one head: the weighted masks are subtracted
/// from the scaled scores before the softmax. s1/s2 are the strengths of
/// mask 1 and mask 2.
template <typename S>
AttentionResult<S> masked_attention(const Mat<S>& q, const Mat<S>& k, const Mat<S>& v,
                                    const augment::MaskPair& masks, S s1, S s2);

/// g * x / max(||x||, 1e-6).
template <typename S>
Mat<S> scalenorm(const Mat<S>& x, S gain);

/// Attention weights captured during encoding, one n-by-n matrix per
/// (layer, head) in layer-major order.
template <typename S>
struct AttnCapture {
    std::vector<Mat<S>> alphas;
};

/// Transformer encoder-decoder with FixNorm embeddings, pre-norm ScaleNorm
/// residual blocks, soft dictionary masks in encoder self-attention with one
/// learnable strength per (layer, mask, head), and a tied input/output
/// embedding.
template <typename S>
class Model {
public:
    using Graph = autodiff::Graph<S>;
    using Param = autodiff::Parameter<S>;

    struct EncInput {
        std::vector<int> ids;
        augment::MaskPair masks;
        std::size_t eos_index = 0;
    };

    Model(ModelConfig cfg, Vocab vocab, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    const Vocab& vocab() const { return vocab_; }

    /// Normalized, gain-scaled embedding table node; shared by the encoder
    /// input, decoder input, and the tied output projection.
    int build_embedding(Graph& g);

    /// Encoder stack over an augmented example. `input.masks` must stay alive
    /// until backward() has run.
    int build_encode(Graph& g, int emb_n, const EncInput& input, bool train, Rng& rng,
                     AttnCapture<S>* capture = nullptr);

    /// Decoder stack + tied projection; returns logits (|tgt_in| x vocab).
    int build_logits(Graph& g, int emb_n, int enc_states, std::size_t src_eos,
                     const std::vector<int>& tgt_in, bool train, Rng& rng);

    struct LossBuild {
        int loss_node = -1;
        int n_tokens = 0;
    };

    /// Teacher-forced loss: decoder input tgt[0..n-1), gold tgt[1..n).
    LossBuild build_loss(Graph& g, const EncInput& input, const std::vector<int>& tgt_full,
                         bool train, Rng& rng);

    /// Convenience forward pass (fresh graph, no gradient use by caller).
    S loss_value(const EncInput& input, const std::vector<int>& tgt_full);

    /// Encoder states as a plain matrix (eval mode).
    Mat<S> encode_states(const EncInput& input, AttnCapture<S>* capture = nullptr);

    /// Next-token log-probabilities after tgt_in, given cached encoder states.
    Eigen::RowVectorX<S> next_token_logprobs(const Mat<S>& enc_states, std::size_t src_eos,
                                             const std::vector<int>& tgt_in);

    std::vector<Param*> parameters();
    Param* find_parameter(const std::string& name);

    /// Per-layer mask strengths, shape 2 x heads (row 0 = mask 1).
    const Mat<S>& mask_strengths(int layer) const { return enc_layers_[static_cast<std::size_t>(layer)].mask_s->value; }

    /// When set, both dictionary masks are treated as all-zero (ablation).
    void set_ablate_masks(bool on) { ablate_masks_ = on; }
    bool ablate_masks() const { return ablate_masks_; }

private:
    struct HeadW {
        Param* wq;
        Param* wk;
        Param* wv;
        Param* wo;
    };
    struct AttnW {
        std::vector<HeadW> heads;
        Param* bo;
        Param* norm_gain;
    };
    struct FfnW {
        Param* w1;
        Param* b1;
        Param* w2;
        Param* b2;
        Param* norm_gain;
    };
    struct EncLayer {
        AttnW attn;
        FfnW ffn;
        Param* mask_s;  // 2 x heads
    };
    struct DecLayer {
        AttnW self;
        AttnW cross;
        FfnW ffn;
    };

    Param* make_param(const std::string& name, int rows, int cols, Rng& rng, bool xavier);
    AttnW make_attn(const std::string& prefix, Rng& rng);
    FfnW make_ffn(const std::string& prefix, Rng& rng);

    int dropout(Graph& g, int x, bool train, Rng& rng);
    int prenorm(Graph& g, int x, Param* gain);
    int ffn_block(Graph& g, int x, const FfnW& w, bool train, Rng& rng);

    // One multi-head attention sublayer. kv == -1 means self-attention.
    // Exactly one of enc_masks / extra_penalty may be non-null: enc_masks
    // applies the learned dictionary masks of `mask_s`, extra_penalty is a
    // constant additive matrix (causal or cross-attention masking).
    int attention_block(Graph& g, int x, int kv, const AttnW& w,
                        const augment::MaskPair* enc_masks, Param* mask_s,
                        const Mat<S>* extra_penalty, bool train, Rng& rng,
                        AttnCapture<S>* capture);

    ModelConfig cfg_;
    Vocab vocab_;
    Mat<S> positions_;
    bool ablate_masks_ = false;
    augment::MaskPair zero_masks_;  // reused when ablating

    std::vector<std::unique_ptr<Param>> params_;
    Param* emb_ = nullptr;
    Param* fixnorm_gain_ = nullptr;
    Param* enc_final_gain_ = nullptr;
    Param* dec_final_gain_ = nullptr;
    std::vector<EncLayer> enc_layers_;
    std::vector<DecLayer> dec_layers_;
};

/// Summed encoder attention heatmap (all layers, all heads) plus the token
/// labels, exported by the CLI as CSV.
template <typename S>
struct Heatmap {
    std::vector<std::string> labels;
    Mat<S> scores;
};

template <typename S>
Heatmap<S> attention_heatmap(Model<S>& model, const augment::AugmentedExample& example);

/// Length-normalized beam search; beam_size 1 is greedy decoding. Returns
/// target ids without <bos>/<eos>.
template <typename S>
std::vector<int> beam_search(Model<S>& model, const typename Model<S>::EncInput& input,
                             int beam_size, int max_steps);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace nmt::model
