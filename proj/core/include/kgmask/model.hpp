#pragma once

#include "kgmask/rng.hpp"
#include "kgmask/tensor.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgmask {

// Token vocabulary with the fixed special prefix.
struct Vocab {
    static constexpr int32_t kPad = 0;
    static constexpr int32_t kMask = 1;
    static constexpr int32_t kCls = 2;
    static constexpr int32_t kEnt = 3;
    static constexpr int32_t kUnk = 4;
    static constexpr int32_t kNumSpecial = 5;

    std::vector<std::string> tokens; // id -> token, specials first
    std::unordered_map<std::string, int32_t> ids;

    static Vocab build(const std::vector<std::string>& regular_tokens_sorted);
    int32_t id(const std::string& token) const; // [UNK] for unknown
    int32_t size() const { return static_cast<int32_t>(tokens.size()); }
    bool is_special(int32_t id) const { return id < kNumSpecial; }
};

struct LayerParams {
    Mat wq, wk, wv, wo; // d x d
    Vec bq, bk, bv, bo; // d
    Mat w1;             // d x 4d
    Vec b1;             // 4d
    Mat w2;             // 4d x d
    Vec b2;             // d
    Vec ln1_g, ln1_b;   // d
    Vec ln2_g, ln2_b;   // d
};

struct ScorerParams {
    Mat w;        // d x d
    double b = 0; // shared bias
};

// Full parameter set. Also used as the gradient container: zeros_like gives
// a structurally identical, zero-filled copy.
struct ModelParams {
    Vocab vocab;
    int d_h = 32;
    int n_layers = 2;
    int n_heads = 2;
    int max_ctx = 80;
    int max_ent = 20;

    Mat tok_emb;  // |V| x d; also the tied MLM output projection
    Mat pos_ctx;  // max_ctx x d
    Mat pos_ent;  // max_ent x d
    std::vector<LayerParams> layers;
    Vec mlm_bias; // |V|
    ScorerParams scorer;

    static ModelParams init(Vocab vocab, int d_h, int n_layers, int n_heads, int max_ctx,
                            int max_ent, Rng& rng); // uniform(-0.05, 0.05) weights, zero biases
    static ModelParams zeros_like(const ModelParams& other);

    // Element-wise p -= lr * g over every parameter tensor.
    void sgd_step(const ModelParams& grads, double lr);
    bool all_finite() const;

    // Visits every parameter tensor as a flat span, in a fixed order shared
    // with zeros_like copies (used by the finite-difference harness).
    template <typename F> void for_each_tensor(F&& f) {
        f("tok_emb", tok_emb.a);
        f("pos_ctx", pos_ctx.a);
        f("pos_ent", pos_ent.a);
        for (size_t l = 0; l < layers.size(); ++l) {
            auto& L = layers[l];
            const std::string p = "layer" + std::to_string(l) + ".";
            f(p + "wq", L.wq.a);
            f(p + "bq", L.bq);
            f(p + "wk", L.wk.a);
            f(p + "bk", L.bk);
            f(p + "wv", L.wv.a);
            f(p + "bv", L.bv);
            f(p + "wo", L.wo.a);
            f(p + "bo", L.bo);
            f(p + "w1", L.w1.a);
            f(p + "b1", L.b1);
            f(p + "w2", L.w2.a);
            f(p + "b2", L.b2);
            f(p + "ln1_g", L.ln1_g);
            f(p + "ln1_b", L.ln1_b);
            f(p + "ln2_g", L.ln2_g);
            f(p + "ln2_b", L.ln2_b);
        }
        f("mlm_bias", mlm_bias);
        f("scorer.w", scorer.w.a);
        // scorer.b handled separately by callers that need scalars
    }
};

// Cached activations of one encoder run, enough for an exact backward pass.
struct LayerTrace {
    Mat x_in;
    Mat q, k, v;             // n x d
    std::vector<Mat> att;    // per head: n x n softmax rows
    Mat att_concat;          // n x d, heads' outputs before wo
    Mat res1;                // x_in + attention output
    Mat ln1_xhat;            // normalized res1
    Vec ln1_inv_sigma;       // n
    Mat x1;                  // after LN1
    Mat ffn_pre;             // x1 w1 + b1
    Mat ffn_act;             // gelu(ffn_pre)
    Mat res2;                // x1 + ffn out
    Mat ln2_xhat;
    Vec ln2_inv_sigma;
    Mat x2;                  // layer output
};

struct EncoderTrace {
    std::vector<int32_t> token_ids;
    bool entity_positions = false;
    Mat x0; // embeddings
    std::vector<LayerTrace> layers;

    const Mat& out() const { return layers.empty() ? x0 : layers.back().x2; }
};

// Bidirectional encoder over token ids; one row of the output per position.
// `entity_positions` selects the entity position table (otherwise context).
EncoderTrace encode(const ModelParams& params, const std::vector<int32_t>& ids,
                    bool entity_positions);

// Context encoding of a (corrupted) token sequence; sequences longer than
// max_ctx are truncated (flagged via `truncated` when given).
EncoderTrace encode_context(const ModelParams& params, const std::vector<std::string>& tokens,
                            bool* truncated = nullptr);

// Entity encoding: [CLS] + surface tokens + [ENT] with the entity position
// table; the entity embedding is row 0 ([CLS]) of the output. Overlong
// surface forms lose tokens, never the special markers.
EncoderTrace encode_entity(const ModelParams& params, const std::string& entity_text);

Vec entity_embedding(const EncoderTrace& trace);

// Accumulates into `grads` the gradients of an encoder run given the
// gradient of its output rows.
void encode_backward(const ModelParams& params, const EncoderTrace& trace, const Mat& d_out,
                     ModelParams& grads);

// Mean pooling over H rows [start, end) — the mention representation.
Vec mention_repr(const Mat& h, int32_t start, int32_t end);

// -(1/|M|) sum log softmax(tok_emb . h_i + mlm_bias)[target_i]. The cached
// probabilities allow an exact backward pass.
struct MlmTrace {
    std::vector<int32_t> positions;
    std::vector<int32_t> targets;
    std::vector<Vec> probs; // softmax rows
    double loss = 0.0;
};
MlmTrace mlm_loss(const ModelParams& params, const Mat& h, const std::vector<int32_t>& positions,
                  const std::vector<int32_t>& targets);
// Adds d(mlm)/dH into d_h_acc and parameter gradients into grads, with the
// loss scaled by `scale`.
void mlm_backward(const ModelParams& params, const Mat& h, const MlmTrace& trace, double scale,
                  Mat& d_h_acc, ModelParams& grads);

double bilinear_score(const ScorerParams& scorer, const Vec& v, const Vec& u);

// (1/m) sum max(lambda - s_j + s'_j, 0) over (positive, negative) score pairs.
double ranking_loss(const std::vector<std::pair<double, double>>& scores, double lambda);

double total_loss(double l_mlm, double l_rank, double gamma);

double logistic(double x);

} // namespace kgmask
