#include "kgmask/trainer.hpp"

#include "kgmask/errors.hpp"
#include "kgmask/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace kgmask {

const std::set<std::string>& TrainConfig::known_keys() {
    static const std::set<std::string> keys = {
        "d_h",    "layers",  "heads",   "lr",      "batch_size", "steps",
        "margin", "gamma",   "max_ctx", "max_ent", "seed",       "eval_every",
    };
    return keys;
}

void TrainConfig::apply(const KvConfig& cfg) {
    cfg.require_known(known_keys());
    d_h = static_cast<int>(cfg.get_int("d_h", d_h));
    layers = static_cast<int>(cfg.get_int("layers", layers));
    heads = static_cast<int>(cfg.get_int("heads", heads));
    lr = cfg.get_double("lr", lr);
    batch_size = static_cast<int>(cfg.get_int("batch_size", batch_size));
    steps = static_cast<int>(cfg.get_int("steps", steps));
    margin = cfg.get_double("margin", margin);
    gamma = cfg.get_double("gamma", gamma);
    max_ctx = static_cast<int>(cfg.get_int("max_ctx", max_ctx));
    max_ent = static_cast<int>(cfg.get_int("max_ent", max_ent));
    seed = static_cast<uint64_t>(cfg.get_int("seed", static_cast<long>(seed)));
    eval_every = static_cast<int>(cfg.get_int("eval_every", eval_every));
    validate();
}

void TrainConfig::validate() const {
    if (d_h <= 0 || heads <= 0 || d_h % heads != 0)
        throw UsageError("train config: d_h must be positive and divisible by heads");
    if (layers <= 0) throw UsageError("train config: layers must be >= 1");
    if (batch_size <= 0) throw UsageError("train config: batch_size must be >= 1");
    if (steps < 0) throw UsageError("train config: steps must be >= 0");
    if (margin < 0.0) throw UsageError("train config: margin must be >= 0");
    if (gamma < 0.0) throw UsageError("train config: gamma must be >= 0");
    if (max_ent < 3) throw UsageError("train config: max_ent must be >= 3");
    if (max_ctx < 1) throw UsageError("train config: max_ctx must be >= 1");
}

std::string TrainConfig::echo() const {
    std::string s;
    auto kv = [&s](const std::string& k, const std::string& v) {
        if (!s.empty()) s += ' ';
        s += k + "=" + v;
    };
    kv("d_h", std::to_string(d_h));
    kv("layers", std::to_string(layers));
    kv("heads", std::to_string(heads));
    kv("lr", format_double(lr));
    kv("batch_size", std::to_string(batch_size));
    kv("steps", std::to_string(steps));
    kv("margin", format_double(margin));
    kv("gamma", format_double(gamma));
    kv("max_ctx", std::to_string(max_ctx));
    kv("max_ent", std::to_string(max_ent));
    kv("seed", std::to_string(seed));
    kv("eval_every", std::to_string(eval_every));
    return s;
}

PreparedExample prepare_example(const TrainingExample& ex, const KnowledgeGraph& kg,
                                const Vocab& vocab, int max_ctx) {
    PreparedExample out;
    out.doc_id = ex.doc_id;
    const size_t n = std::min(ex.corrupted.size(), static_cast<size_t>(max_ctx));
    out.ctx_ids.reserve(n);
    for (size_t i = 0; i < n; ++i) out.ctx_ids.push_back(vocab.id(ex.corrupted[i]));
    for (int32_t p : ex.masked_positions) {
        if (p >= static_cast<int32_t>(n)) continue; // truncated away
        out.masked_positions.push_back(p);
        out.targets.push_back(vocab.id(ex.tokens[static_cast<size_t>(p)]));
    }
    if (out.masked_positions.empty())
        throw DataError("example " + ex.doc_id + ": no masked position within the context window");
    for (const auto& s : ex.entity_spans) {
        if (s.end > static_cast<int32_t>(n)) continue;
        out.pairs.push_back({s.start, s.end, kg.entity_text(s.positive), kg.entity_text(s.negative)});
    }
    return out;
}

namespace {

struct PairForward {
    EncoderTrace pos_trace;
    EncoderTrace neg_trace;
    Vec v, u_pos, u_neg;
    double s_pos = 0.0, s_neg = 0.0;
};

LossParts forward_example(const ModelParams& params, const PreparedExample& ex, double margin,
                          double gamma, EncoderTrace* ctx_out, MlmTrace* mlm_out,
                          std::vector<PairForward>* pairs_out) {
    EncoderTrace ctx = encode(params, ex.ctx_ids, false);
    const Mat& h = ctx.out();
    MlmTrace mlm = mlm_loss(params, h, ex.masked_positions, ex.targets);

    LossParts parts;
    parts.mlm = mlm.loss;
    std::vector<PairForward> pairs;
    if (!ex.pairs.empty()) {
        std::vector<std::pair<double, double>> scores;
        for (const auto& p : ex.pairs) {
            PairForward pf;
            pf.v = mention_repr(h, p.start, p.end);
            pf.pos_trace = encode_entity(params, p.positive_text);
            pf.neg_trace = encode_entity(params, p.negative_text);
            pf.u_pos = entity_embedding(pf.pos_trace);
            pf.u_neg = entity_embedding(pf.neg_trace);
            pf.s_pos = bilinear_score(params.scorer, pf.v, pf.u_pos);
            pf.s_neg = bilinear_score(params.scorer, pf.v, pf.u_neg);
            scores.emplace_back(pf.s_pos, pf.s_neg);
            pairs.push_back(std::move(pf));
        }
        parts.rank = ranking_loss(scores, margin);
    }
    parts.total = total_loss(parts.mlm, parts.rank, gamma);
    if (ctx_out) *ctx_out = std::move(ctx);
    if (mlm_out) *mlm_out = std::move(mlm);
    if (pairs_out) *pairs_out = std::move(pairs);
    return parts;
}

} // namespace

LossParts example_loss(const ModelParams& params, const PreparedExample& ex, double margin,
                       double gamma) {
    return forward_example(params, ex, margin, gamma, nullptr, nullptr, nullptr);
}

LossParts compute_gradients(const ModelParams& params, const std::vector<PreparedExample>& batch,
                            double margin, double gamma, ModelParams& grads) {
    if (batch.empty()) throw UsageError("compute_gradients: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    LossParts batch_parts;
    for (const auto& ex : batch) {
        EncoderTrace ctx;
        MlmTrace mlm;
        std::vector<PairForward> pairs;
        const LossParts parts = forward_example(params, ex, margin, gamma, &ctx, &mlm, &pairs);
        if (!std::isfinite(parts.total))
            throw RuntimeError("non-finite loss on example " + ex.doc_id);
        batch_parts.mlm += parts.mlm * inv_b;
        batch_parts.rank += parts.rank * inv_b;
        batch_parts.total += parts.total * inv_b;

        const Mat& h = ctx.out();
        Mat d_h(h.rows, h.cols);
        mlm_backward(params, h, mlm, inv_b, d_h, grads);

        if (!pairs.empty()) {
            const double pair_scale = gamma * inv_b / static_cast<double>(pairs.size());
            const int d = params.d_h;
            for (const auto& pf : pairs) {
                const double margin_term = margin - pf.s_pos + pf.s_neg;
                if (margin_term <= 0.0) continue; // subgradient 0 at the kink
                // d/ds_pos = -1, d/ds_neg = +1, each scaled by pair_scale.
                grads.scorer.b += -pair_scale;
                grads.scorer.b += pair_scale;
                Vec dv(static_cast<size_t>(d), 0.0);
                Vec du_pos(static_cast<size_t>(d), 0.0);
                Vec du_neg(static_cast<size_t>(d), 0.0);
                for (int i = 0; i < d; ++i) {
                    const double* wi = params.scorer.w.row(i);
                    double* gwi = grads.scorer.w.row(i);
                    const double vi = pf.v[static_cast<size_t>(i)];
                    double acc = 0.0;
                    for (int j = 0; j < d; ++j) {
                        const double diff = pf.u_neg[static_cast<size_t>(j)] - pf.u_pos[static_cast<size_t>(j)];
                        gwi[j] += pair_scale * vi * diff;
                        acc += wi[j] * diff;
                        const double dj = pair_scale * vi * wi[j];
                        du_pos[static_cast<size_t>(j)] -= dj;
                        du_neg[static_cast<size_t>(j)] += dj;
                    }
                    dv[static_cast<size_t>(i)] = pair_scale * acc;
                }
                // Pooled mention gradient spreads evenly over the span rows.
                const auto& exp_pair = ex.pairs[static_cast<size_t>(&pf - pairs.data())];
                const double inv_len = 1.0 / static_cast<double>(exp_pair.end - exp_pair.start);
                for (int32_t r = exp_pair.start; r < exp_pair.end; ++r) {
                    double* dhr = d_h.row(r);
                    for (int j = 0; j < d; ++j) dhr[j] += dv[static_cast<size_t>(j)] * inv_len;
                }
                Mat d_pos(pf.pos_trace.out().rows, d);
                for (int j = 0; j < d; ++j) d_pos(0, j) = du_pos[static_cast<size_t>(j)];
                encode_backward(params, pf.pos_trace, d_pos, grads);
                Mat d_neg(pf.neg_trace.out().rows, d);
                for (int j = 0; j < d; ++j) d_neg(0, j) = du_neg[static_cast<size_t>(j)];
                encode_backward(params, pf.neg_trace, d_neg, grads);
            }
        }
        encode_backward(params, ctx, d_h, grads);
    }
    return batch_parts;
}

Vocab build_vocab(const std::vector<TrainingExample>& examples, const KnowledgeGraph& kg) {
    std::set<std::string> words;
    for (const auto& ex : examples) {
        for (const auto& t : ex.tokens) words.insert(t);
        for (const auto& t : ex.corrupted) words.insert(t);
    }
    for (EntityId e = 0; e < static_cast<EntityId>(kg.entity_count()); ++e)
        for (const auto& t : tokenize(kg.entity_text(e))) words.insert(t);
    for (RelationId r = 0; r < static_cast<RelationId>(kg.relation_count()); ++r)
        for (const auto& t : tokenize(kg.relation_text(r))) words.insert(t);
    return Vocab::build({words.begin(), words.end()});
}

double eval_mlm_loss(const ModelParams& params, const std::vector<PreparedExample>& eval_set) {
    if (eval_set.empty()) throw UsageError("eval_mlm_loss: empty evaluation set");
    double sum = 0.0;
    for (const auto& ex : eval_set) {
        EncoderTrace ctx = encode(params, ex.ctx_ids, false);
        sum += mlm_loss(params, ctx.out(), ex.masked_positions, ex.targets).loss;
    }
    return sum / static_cast<double>(eval_set.size());
}

double eval_rank_accuracy(const ModelParams& params, const std::vector<PreparedExample>& eval_set) {
    size_t correct = 0, total = 0;
    for (const auto& ex : eval_set) {
        if (ex.pairs.empty()) continue;
        EncoderTrace ctx = encode(params, ex.ctx_ids, false);
        const Mat& h = ctx.out();
        for (const auto& p : ex.pairs) {
            const Vec v = mention_repr(h, p.start, p.end);
            const Vec u_pos = entity_embedding(encode_entity(params, p.positive_text));
            const Vec u_neg = entity_embedding(encode_entity(params, p.negative_text));
            if (bilinear_score(params.scorer, v, u_pos) > bilinear_score(params.scorer, v, u_neg))
                ++correct;
            ++total;
        }
    }
    if (total == 0) throw UsageError("eval_rank_accuracy: no ranking pairs in evaluation set");
    return static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult train(const TrainConfig& cfg, const std::vector<TrainingExample>& examples,
                  const KnowledgeGraph& kg, const std::vector<TrainingExample>* eval_examples) {
    cfg.validate();
    if (examples.empty()) throw DataError("train: no examples");
    const Vocab vocab = build_vocab(examples, kg);

    std::vector<PreparedExample> prepared;
    prepared.reserve(examples.size());
    for (const auto& ex : examples) prepared.push_back(prepare_example(ex, kg, vocab, cfg.max_ctx));

    std::vector<PreparedExample> eval_prepared;
    if (eval_examples)
        for (const auto& ex : *eval_examples)
            eval_prepared.push_back(prepare_example(ex, kg, vocab, cfg.max_ctx));

    Rng rng(cfg.seed);
    TrainResult result;
    result.params = ModelParams::init(vocab, cfg.d_h, cfg.layers, cfg.heads, cfg.max_ctx,
                                      cfg.max_ent, rng);

    auto maybe_eval = [&](int step) {
        if (eval_prepared.empty() || cfg.eval_every <= 0) return;
        result.eval_log.push_back({step, eval_mlm_loss(result.params, eval_prepared),
                                   eval_rank_accuracy(result.params, eval_prepared)});
    };

    std::vector<size_t> order(prepared.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    size_t cursor = order.size(); // forces a shuffle before the first batch

    maybe_eval(0);
    for (int step = 1; step <= cfg.steps; ++step) {
        std::vector<PreparedExample> batch;
        batch.reserve(static_cast<size_t>(cfg.batch_size));
        for (int i = 0; i < cfg.batch_size; ++i) {
            if (cursor >= order.size()) {
                for (size_t j = order.size(); j > 1; --j)
                    std::swap(order[j - 1], order[rng.uniform_index(j)]);
                cursor = 0;
            }
            batch.push_back(prepared[order[cursor++]]);
        }
        ModelParams grads = ModelParams::zeros_like(result.params);
        LossParts parts;
        try {
            parts = compute_gradients(result.params, batch, cfg.margin, cfg.gamma, grads);
        } catch (const RuntimeError& e) {
            result.aborted = true;
            result.abort_reason = e.what();
            break; // params are still the last good state
        }
        if (!std::isfinite(parts.total)) {
            result.aborted = true;
            result.abort_reason = "non-finite loss at step " + std::to_string(step);
            break;
        }
        result.params.sgd_step(grads, cfg.lr);
        result.log.push_back({step, parts.mlm, parts.rank, parts.total});
        if (cfg.eval_every > 0 && step % cfg.eval_every == 0) maybe_eval(step);
    }
    return result;
}

namespace {

std::string hexfloat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

} // namespace

void save_checkpoint(const ModelParams& params, const std::string& path,
                     const std::string& header_echo) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << "# kgmask-checkpoint v1";
    if (!header_echo.empty()) out << " | " << header_echo;
    out << "\n";
    out << "dims " << params.d_h << ' ' << params.n_layers << ' ' << params.n_heads << ' '
        << params.max_ctx << ' ' << params.max_ent << "\n";
    out << "vocab " << params.vocab.size() << "\n";
    for (const auto& t : params.vocab.tokens) out << t << "\n";
    out << "scorer_b " << hexfloat(params.scorer.b) << "\n";
    const_cast<ModelParams&>(params).for_each_tensor([&out](const std::string& name, Vec& t) {
        out << "tensor " << name << ' ' << t.size();
        for (double v : t) out << ' ' << hexfloat(v);
        out << "\n";
    });
    if (!out) throw DataError("write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# kgmask-checkpoint v1", 0) != 0)
        throw DataError(path + ": not a kgmask checkpoint");
    std::string word;
    int d_h, layers, heads, max_ctx, max_ent;
    in >> word;
    if (word != "dims" || !(in >> d_h >> layers >> heads >> max_ctx >> max_ent))
        throw DataError(path + ": bad dims header");
    in >> word;
    size_t vocab_size = 0;
    if (word != "vocab" || !(in >> vocab_size)) throw DataError(path + ": bad vocab header");
    std::getline(in, line);
    Vocab vocab;
    for (size_t i = 0; i < vocab_size; ++i) {
        if (!std::getline(in, line)) throw DataError(path + ": truncated vocab");
        chomp_cr(line);
        vocab.tokens.push_back(line);
        vocab.ids.emplace(line, static_cast<int32_t>(i));
    }
    Rng rng(0);
    ModelParams params =
        ModelParams::init(std::move(vocab), d_h, layers, heads, max_ctx, max_ent, rng);
    in >> word;
    if (word != "scorer_b") throw DataError(path + ": missing scorer_b");
    std::string value;
    in >> value;
    params.scorer.b = std::strtod(value.c_str(), nullptr);
    params.for_each_tensor([&](const std::string& name, Vec& t) {
        std::string tag, got_name;
        size_t count = 0;
        if (!(in >> tag >> got_name >> count) || tag != "tensor" || got_name != name ||
            count != t.size())
            throw DataError(path + ": bad tensor block, expected " + name);
        for (size_t i = 0; i < count; ++i) {
            if (!(in >> value)) throw DataError(path + ": truncated tensor " + name);
            t[i] = std::strtod(value.c_str(), nullptr);
        }
    });
    return params;
}

void write_loss_log_csv(const std::string& path, const std::vector<LossRow>& log,
                        const std::string& header_echo) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write loss log: " + path);
    out << "# kgmask-losslog v1";
    if (!header_echo.empty()) out << " | " << header_echo;
    out << "\nstep,L_M,L_R,L\n";
    char buf[128];
    for (const auto& row : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", row.step, row.l_mlm, row.l_rank,
                      row.l_total);
        out << buf;
    }
}

void write_eval_log_csv(const std::string& path, const std::vector<EvalRow>& log,
                        const std::string& header_echo) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write eval log: " + path);
    out << "# kgmask-evallog v1";
    if (!header_echo.empty()) out << " | " << header_echo;
    out << "\nstep,heldout_L_M,rank_accuracy\n";
    char buf[128];
    for (const auto& row : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", row.step, row.l_mlm, row.rank_accuracy);
        out << buf;
    }
}

} // namespace kgmask
