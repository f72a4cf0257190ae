#include "kgmask/model.hpp"

#include "kgmask/errors.hpp"
#include "kgmask/text.hpp"

#include <algorithm>
#include <cmath>

namespace kgmask {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * std::exp(-0.5 * x * x) * kInvSqrt2Pi;
}

void add_bias(Mat& m, const Vec& b) {
    for (int i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        for (int j = 0; j < m.cols; ++j) r[j] += b[static_cast<size_t>(j)];
    }
}

void bias_grad_acc(const Mat& d, Vec& db) {
    for (int i = 0; i < d.rows; ++i) {
        const double* r = d.row(i);
        for (int j = 0; j < d.cols; ++j) db[static_cast<size_t>(j)] += r[j];
    }
}

// y = g .* xhat + b rowwise; caches xhat and 1/sigma.
void layer_norm(const Mat& x, const Vec& g, const Vec& b, Mat& y, Mat& xhat, Vec& inv_sigma) {
    const int n = x.rows, d = x.cols;
    y = Mat(n, d);
    xhat = Mat(n, d);
    inv_sigma.assign(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += xi[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = xi[j] - mean;
            var += c * c;
        }
        var /= d;
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        inv_sigma[static_cast<size_t>(i)] = inv;
        double* xh = xhat.row(i);
        double* yi = y.row(i);
        for (int j = 0; j < d; ++j) {
            xh[j] = (xi[j] - mean) * inv;
            yi[j] = g[static_cast<size_t>(j)] * xh[j] + b[static_cast<size_t>(j)];
        }
    }
}

// Backward of layer_norm; accumulates dg, db and writes dx.
void layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& inv_sigma, const Vec& g,
                         Vec& dg, Vec& db, Mat& dx) {
    const int n = dy.rows, d = dy.cols;
    dx = Mat(n, d);
    for (int i = 0; i < n; ++i) {
        const double* dyi = dy.row(i);
        const double* xh = xhat.row(i);
        double* dxi = dx.row(i);
        double mean_t = 0.0, mean_tx = 0.0;
        for (int j = 0; j < d; ++j) {
            const double t = dyi[j] * g[static_cast<size_t>(j)];
            mean_t += t;
            mean_tx += t * xh[j];
            dg[static_cast<size_t>(j)] += dyi[j] * xh[j];
            db[static_cast<size_t>(j)] += dyi[j];
        }
        mean_t /= d;
        mean_tx /= d;
        const double inv = inv_sigma[static_cast<size_t>(i)];
        for (int j = 0; j < d; ++j) {
            const double t = dyi[j] * g[static_cast<size_t>(j)];
            dxi[j] = inv * (t - mean_t - xh[j] * mean_tx);
        }
    }
}

Mat uniform_mat(int rows, int cols, Rng& rng) {
    Mat m(rows, cols);
    for (auto& v : m.a) v = (rng.next_double() * 2.0 - 1.0) * 0.05;
    return m;
}

} // namespace

Vocab Vocab::build(const std::vector<std::string>& regular_tokens_sorted) {
    Vocab v;
    v.tokens = {"[PAD]", "[MASK]", "[CLS]", "[ENT]", "[UNK]"};
    for (const auto& t : v.tokens) v.ids.emplace(t, static_cast<int32_t>(v.ids.size()));
    for (const auto& t : regular_tokens_sorted) {
        if (v.ids.count(t)) continue;
        v.ids.emplace(t, static_cast<int32_t>(v.tokens.size()));
        v.tokens.push_back(t);
    }
    return v;
}

int32_t Vocab::id(const std::string& token) const {
    auto it = ids.find(token);
    return it == ids.end() ? kUnk : it->second;
}

ModelParams ModelParams::init(Vocab vocab, int d_h, int n_layers, int n_heads, int max_ctx,
                              int max_ent, Rng& rng) {
    if (d_h <= 0 || n_layers <= 0 || n_heads <= 0 || d_h % n_heads != 0)
        throw UsageError("model: need d_h > 0 divisible by n_heads");
    ModelParams p;
    p.vocab = std::move(vocab);
    p.d_h = d_h;
    p.n_layers = n_layers;
    p.n_heads = n_heads;
    p.max_ctx = max_ctx;
    p.max_ent = max_ent;
    const int v = p.vocab.size();
    p.tok_emb = uniform_mat(v, d_h, rng);
    p.pos_ctx = uniform_mat(max_ctx, d_h, rng);
    p.pos_ent = uniform_mat(max_ent, d_h, rng);
    for (int l = 0; l < n_layers; ++l) {
        LayerParams L;
        L.wq = uniform_mat(d_h, d_h, rng);
        L.wk = uniform_mat(d_h, d_h, rng);
        L.wv = uniform_mat(d_h, d_h, rng);
        L.wo = uniform_mat(d_h, d_h, rng);
        L.bq.assign(static_cast<size_t>(d_h), 0.0);
        L.bk.assign(static_cast<size_t>(d_h), 0.0);
        L.bv.assign(static_cast<size_t>(d_h), 0.0);
        L.bo.assign(static_cast<size_t>(d_h), 0.0);
        L.w1 = uniform_mat(d_h, 4 * d_h, rng);
        L.b1.assign(static_cast<size_t>(4 * d_h), 0.0);
        L.w2 = uniform_mat(4 * d_h, d_h, rng);
        L.b2.assign(static_cast<size_t>(d_h), 0.0);
        L.ln1_g.assign(static_cast<size_t>(d_h), 1.0);
        L.ln1_b.assign(static_cast<size_t>(d_h), 0.0);
        L.ln2_g.assign(static_cast<size_t>(d_h), 1.0);
        L.ln2_b.assign(static_cast<size_t>(d_h), 0.0);
        p.layers.push_back(std::move(L));
    }
    p.mlm_bias.assign(static_cast<size_t>(v), 0.0);
    p.scorer.w = uniform_mat(d_h, d_h, rng);
    p.scorer.b = 0.0;
    return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
    ModelParams p = other;
    p.for_each_tensor([](const std::string&, Vec& t) { std::fill(t.begin(), t.end(), 0.0); });
    p.scorer.b = 0.0;
    return p;
}

void ModelParams::sgd_step(const ModelParams& grads, double lr) {
    std::vector<Vec*> mine;
    for_each_tensor([&](const std::string&, Vec& t) { mine.push_back(&t); });
    std::vector<const Vec*> theirs;
    const_cast<ModelParams&>(grads).for_each_tensor(
        [&](const std::string&, Vec& t) { theirs.push_back(&t); });
    for (size_t i = 0; i < mine.size(); ++i) {
        Vec& p = *mine[i];
        const Vec& g = *theirs[i];
        for (size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
    }
    scorer.b -= lr * grads.scorer.b;
}

bool ModelParams::all_finite() const {
    bool ok = std::isfinite(scorer.b);
    const_cast<ModelParams*>(this)->for_each_tensor([&](const std::string&, Vec& t) {
        for (double v : t)
            if (!std::isfinite(v)) ok = false;
    });
    return ok;
}

EncoderTrace encode(const ModelParams& params, const std::vector<int32_t>& ids,
                    bool entity_positions) {
    const int n = static_cast<int>(ids.size());
    const int d = params.d_h;
    const Mat& pos = entity_positions ? params.pos_ent : params.pos_ctx;
    if (n == 0) throw UsageError("encode: empty sequence");
    if (n > pos.rows)
        throw RuntimeError("encode: sequence length " + std::to_string(n) +
                           " exceeds position table " + std::to_string(pos.rows));

    EncoderTrace trace;
    trace.token_ids = ids;
    trace.entity_positions = entity_positions;
    trace.x0 = Mat(n, d);
    for (int i = 0; i < n; ++i) {
        const double* e = params.tok_emb.row(ids[static_cast<size_t>(i)]);
        const double* pe = pos.row(i);
        double* x = trace.x0.row(i);
        for (int j = 0; j < d; ++j) x[j] = e[j] + pe[j];
    }

    const int heads = params.n_heads;
    const int dk = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    const Mat* x = &trace.x0;
    for (const LayerParams& L : params.layers) {
        LayerTrace t;
        t.x_in = *x;
        matmul(t.x_in, L.wq, t.q);
        add_bias(t.q, L.bq);
        matmul(t.x_in, L.wk, t.k);
        add_bias(t.k, L.bk);
        matmul(t.x_in, L.wv, t.v);
        add_bias(t.v, L.bv);

        t.att.assign(static_cast<size_t>(heads), Mat());
        t.att_concat = Mat(n, d);
        for (int h = 0; h < heads; ++h) {
            const int off = h * dk;
            Mat& att = t.att[static_cast<size_t>(h)];
            att = Mat(n, n);
            for (int i = 0; i < n; ++i) {
                double maxv = -1e300;
                for (int j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (int u = 0; u < dk; ++u) s += t.q(i, off + u) * t.k(j, off + u);
                    s *= scale;
                    att(i, j) = s;
                    maxv = std::max(maxv, s);
                }
                double sum = 0.0;
                for (int j = 0; j < n; ++j) {
                    att(i, j) = std::exp(att(i, j) - maxv);
                    sum += att(i, j);
                }
                for (int j = 0; j < n; ++j) att(i, j) /= sum;
                for (int u = 0; u < dk; ++u) {
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += att(i, j) * t.v(j, off + u);
                    t.att_concat(i, off + u) = acc;
                }
            }
        }

        Mat attn_out;
        matmul(t.att_concat, L.wo, attn_out);
        add_bias(attn_out, L.bo);
        t.res1 = t.x_in;
        for (size_t i = 0; i < t.res1.a.size(); ++i) t.res1.a[i] += attn_out.a[i];
        layer_norm(t.res1, L.ln1_g, L.ln1_b, t.x1, t.ln1_xhat, t.ln1_inv_sigma);

        matmul(t.x1, L.w1, t.ffn_pre);
        add_bias(t.ffn_pre, L.b1);
        t.ffn_act = t.ffn_pre;
        for (auto& v : t.ffn_act.a) v = gelu(v);
        Mat ffn_out;
        matmul(t.ffn_act, L.w2, ffn_out);
        add_bias(ffn_out, L.b2);
        t.res2 = t.x1;
        for (size_t i = 0; i < t.res2.a.size(); ++i) t.res2.a[i] += ffn_out.a[i];
        layer_norm(t.res2, L.ln2_g, L.ln2_b, t.x2, t.ln2_xhat, t.ln2_inv_sigma);

        trace.layers.push_back(std::move(t));
        x = &trace.layers.back().x2;
    }
    return trace;
}

EncoderTrace encode_context(const ModelParams& params, const std::vector<std::string>& tokens,
                            bool* truncated) {
    std::vector<int32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(params.vocab.id(t));
    if (truncated) *truncated = false;
    if (static_cast<int>(ids.size()) > params.max_ctx) {
        ids.resize(static_cast<size_t>(params.max_ctx));
        if (truncated) *truncated = true;
    }
    return encode(params, ids, false);
}

EncoderTrace encode_entity(const ModelParams& params, const std::string& entity_text) {
    auto tokens = tokenize(entity_text);
    const size_t max_surface = static_cast<size_t>(params.max_ent) - 2;
    if (tokens.size() > max_surface) tokens.resize(max_surface);
    std::vector<int32_t> ids;
    ids.reserve(tokens.size() + 2);
    ids.push_back(Vocab::kCls);
    for (const auto& t : tokens) ids.push_back(params.vocab.id(t));
    ids.push_back(Vocab::kEnt);
    return encode(params, ids, true);
}

Vec entity_embedding(const EncoderTrace& trace) {
    const Mat& h = trace.out();
    return Vec(h.row(0), h.row(0) + h.cols);
}

void encode_backward(const ModelParams& params, const EncoderTrace& trace, const Mat& d_out,
                     ModelParams& grads) {
    const int n = d_out.rows;
    const int d = params.d_h;
    const int heads = params.n_heads;
    const int dk = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    Mat dx = d_out;
    for (int l = params.n_layers - 1; l >= 0; --l) {
        const LayerParams& L = params.layers[static_cast<size_t>(l)];
        LayerParams& G = grads.layers[static_cast<size_t>(l)];
        const LayerTrace& t = trace.layers[static_cast<size_t>(l)];

        Mat dres2;
        layer_norm_backward(dx, t.ln2_xhat, t.ln2_inv_sigma, L.ln2_g, G.ln2_g, G.ln2_b, dres2);

        // res2 = x1 + ffn_act*w2 + b2
        Mat dx1 = dres2;
        bias_grad_acc(dres2, G.b2);
        matmul_at_acc(t.ffn_act, dres2, G.w2);
        Mat dffn_act(n, 4 * d);
        matmul_bt_acc(dres2, L.w2, dffn_act);
        for (size_t i = 0; i < dffn_act.a.size(); ++i) dffn_act.a[i] *= gelu_grad(t.ffn_pre.a[i]);
        bias_grad_acc(dffn_act, G.b1);
        matmul_at_acc(t.x1, dffn_act, G.w1);
        matmul_bt_acc(dffn_act, L.w1, dx1);

        Mat dres1;
        layer_norm_backward(dx1, t.ln1_xhat, t.ln1_inv_sigma, L.ln1_g, G.ln1_g, G.ln1_b, dres1);

        // res1 = x_in + att_concat*wo + bo
        Mat dx_in = dres1;
        bias_grad_acc(dres1, G.bo);
        matmul_at_acc(t.att_concat, dres1, G.wo);
        Mat datt_concat(n, d);
        matmul_bt_acc(dres1, L.wo, datt_concat);

        Mat dq(n, d), dkm(n, d), dv(n, d);
        for (int h = 0; h < heads; ++h) {
            const int off = h * dk;
            const Mat& att = t.att[static_cast<size_t>(h)];
            // datt[i][j] and dv from head output
            Mat datt(n, n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int u = 0; u < dk; ++u) acc += datt_concat(i, off + u) * t.v(j, off + u);
                    datt(i, j) = acc;
                }
                for (int j = 0; j < n; ++j) {
                    const double w = att(i, j);
                    if (w == 0.0) continue;
                    for (int u = 0; u < dk; ++u) dv(j, off + u) += w * datt_concat(i, off + u);
                }
            }
            // softmax backward, then scores -> q, k
            for (int i = 0; i < n; ++i) {
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += datt(i, j) * att(i, j);
                for (int j = 0; j < n; ++j) {
                    const double ds = att(i, j) * (datt(i, j) - dot) * scale;
                    for (int u = 0; u < dk; ++u) {
                        dq(i, off + u) += ds * t.k(j, off + u);
                        dkm(j, off + u) += ds * t.q(i, off + u);
                    }
                }
            }
        }
        bias_grad_acc(dq, G.bq);
        matmul_at_acc(t.x_in, dq, G.wq);
        matmul_bt_acc(dq, L.wq, dx_in);
        bias_grad_acc(dkm, G.bk);
        matmul_at_acc(t.x_in, dkm, G.wk);
        matmul_bt_acc(dkm, L.wk, dx_in);
        bias_grad_acc(dv, G.bv);
        matmul_at_acc(t.x_in, dv, G.wv);
        matmul_bt_acc(dv, L.wv, dx_in);

        dx = std::move(dx_in);
    }

    // Embedding backward: token rows (tied table) and position rows.
    Mat& dpos = trace.entity_positions ? grads.pos_ent : grads.pos_ctx;
    for (int i = 0; i < n; ++i) {
        const double* di = dx.row(i);
        double* te = grads.tok_emb.row(trace.token_ids[static_cast<size_t>(i)]);
        double* pe = dpos.row(i);
        for (int j = 0; j < d; ++j) {
            te[j] += di[j];
            pe[j] += di[j];
        }
    }
}

Vec mention_repr(const Mat& h, int32_t start, int32_t end) {
    if (start < 0 || end > h.rows || start >= end) throw UsageError("mention_repr: empty or out-of-bounds span");
    Vec v(static_cast<size_t>(h.cols), 0.0);
    for (int32_t i = start; i < end; ++i) {
        const double* r = h.row(i);
        for (int j = 0; j < h.cols; ++j) v[static_cast<size_t>(j)] += r[j];
    }
    const double inv = 1.0 / static_cast<double>(end - start);
    for (auto& x : v) x *= inv;
    return v;
}

MlmTrace mlm_loss(const ModelParams& params, const Mat& h, const std::vector<int32_t>& positions,
                  const std::vector<int32_t>& targets) {
    if (positions.empty()) throw UsageError("mlm_loss: empty masked set");
    if (positions.size() != targets.size()) throw UsageError("mlm_loss: positions/targets mismatch");
    const int v = params.vocab.size();
    MlmTrace trace;
    trace.positions = positions;
    trace.targets = targets;
    double loss = 0.0;
    for (size_t m = 0; m < positions.size(); ++m) {
        const int32_t p = positions[m];
        if (p < 0 || p >= h.rows) throw UsageError("mlm_loss: position out of bounds");
        const double* hp = h.row(p);
        Vec logits(static_cast<size_t>(v), 0.0);
        for (int j = 0; j < v; ++j) {
            const double* e = params.tok_emb.row(j);
            double s = params.mlm_bias[static_cast<size_t>(j)];
            for (int u = 0; u < h.cols; ++u) s += e[u] * hp[u];
            logits[static_cast<size_t>(j)] = s;
        }
        const double maxv = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (auto& x : logits) {
            x = std::exp(x - maxv);
            sum += x;
        }
        for (auto& x : logits) x /= sum;
        const double p_true = logits[static_cast<size_t>(targets[m])];
        loss -= std::log(std::max(p_true, 1e-300));
        trace.probs.push_back(std::move(logits));
    }
    trace.loss = loss / static_cast<double>(positions.size());
    return trace;
}

void mlm_backward(const ModelParams& params, const Mat& h, const MlmTrace& trace, double scale,
                  Mat& d_h_acc, ModelParams& grads) {
    const int v = params.vocab.size();
    const double inv_m = scale / static_cast<double>(trace.positions.size());
    for (size_t m = 0; m < trace.positions.size(); ++m) {
        const int32_t p = trace.positions[m];
        const double* hp = h.row(p);
        double* dhp = d_h_acc.row(p);
        const Vec& probs = trace.probs[m];
        for (int j = 0; j < v; ++j) {
            double dl = probs[static_cast<size_t>(j)];
            if (j == trace.targets[m]) dl -= 1.0;
            dl *= inv_m;
            if (dl == 0.0) continue;
            double* te = grads.tok_emb.row(j);
            const double* e = params.tok_emb.row(j);
            for (int u = 0; u < h.cols; ++u) {
                te[u] += dl * hp[u];
                dhp[u] += dl * e[u];
            }
            grads.mlm_bias[static_cast<size_t>(j)] += dl;
        }
    }
}

double bilinear_score(const ScorerParams& scorer, const Vec& v, const Vec& u) {
    if (v.size() != static_cast<size_t>(scorer.w.rows) || u.size() != static_cast<size_t>(scorer.w.cols))
        throw UsageError("bilinear_score: dimension mismatch");
    double s = scorer.b;
    for (int i = 0; i < scorer.w.rows; ++i) {
        const double* wi = scorer.w.row(i);
        const double vi = v[static_cast<size_t>(i)];
        if (vi == 0.0) continue;
        double acc = 0.0;
        for (int j = 0; j < scorer.w.cols; ++j) acc += wi[j] * u[static_cast<size_t>(j)];
        s += vi * acc;
    }
    return s;
}

double ranking_loss(const std::vector<std::pair<double, double>>& scores, double lambda) {
    if (scores.empty()) throw UsageError("ranking_loss: empty pair list");
    double loss = 0.0;
    for (const auto& [s_pos, s_neg] : scores) loss += std::max(lambda - s_pos + s_neg, 0.0);
    return loss / static_cast<double>(scores.size());
}

double total_loss(double l_mlm, double l_rank, double gamma) { return l_mlm + gamma * l_rank; }

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace kgmask
