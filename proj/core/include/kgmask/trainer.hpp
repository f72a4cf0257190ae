#pragma once

#include "kgmask/config.hpp"
#include "kgmask/kg.hpp"
#include "kgmask/model.hpp"
#include "kgmask/pipeline.hpp"

#include <set>
#include <string>
#include <vector>

namespace kgmask {

struct TrainConfig {
    int d_h = 32;
    int layers = 2;
    int heads = 2;
    double lr = 0.05;
    int batch_size = 16;
    int steps = 1000;
    double margin = 1.0; // hinge margin
    double gamma = 0.2;  // ranking-loss weight
    int max_ctx = 80;
    int max_ent = 20;
    uint64_t seed = 42;
    int eval_every = 0; // 0 disables held-out evaluation

    static const std::set<std::string>& known_keys();
    void apply(const KvConfig& cfg);
    std::string echo() const;
    void validate() const;
};

// A record resolved against the vocabulary and KG, ready for the encoder.
struct PreparedExample {
    std::string doc_id;
    std::vector<int32_t> ctx_ids; // corrupted tokens, truncated to max_ctx
    std::vector<int32_t> masked_positions;
    std::vector<int32_t> targets; // original token ids at masked positions
    struct Pair {
        int32_t start, end;
        std::string positive_text, negative_text;
    };
    std::vector<Pair> pairs;
};

PreparedExample prepare_example(const TrainingExample& ex, const KnowledgeGraph& kg,
                                const Vocab& vocab, int max_ctx);

struct LossParts {
    double mlm = 0.0;
    double rank = 0.0;
    double total = 0.0;
};

// Forward-only joint loss of one example (rank = 0 when it has no pairs).
LossParts example_loss(const ModelParams& params, const PreparedExample& ex, double margin,
                       double gamma);

// Exact analytic gradients of the batch-mean joint loss; accumulates into
// `grads` (which must be zeros_like(params)) and returns the loss parts
// averaged over the batch.
LossParts compute_gradients(const ModelParams& params, const std::vector<PreparedExample>& batch,
                            double margin, double gamma, ModelParams& grads);

struct LossRow {
    int step;
    double l_mlm, l_rank, l_total;
};
struct EvalRow {
    int step;
    double l_mlm;
    double rank_accuracy; // P(s_pos > s_neg) over held-out pairs
};

struct TrainResult {
    ModelParams params;
    std::vector<LossRow> log;
    std::vector<EvalRow> eval_log;
    bool aborted = false;
    std::string abort_reason;
};

// Vocabulary covering the examples, entity surfaces and relation labels.
Vocab build_vocab(const std::vector<TrainingExample>& examples, const KnowledgeGraph& kg);

// Plain SGD on the joint objective. Deterministic under a fixed seed; with
// steps == 0 the returned parameters equal the initialization. On a
// non-finite loss the loop aborts and returns the last good parameters.
TrainResult train(const TrainConfig& cfg, const std::vector<TrainingExample>& examples,
                  const KnowledgeGraph& kg,
                  const std::vector<TrainingExample>* eval_examples = nullptr);

double eval_mlm_loss(const ModelParams& params, const std::vector<PreparedExample>& eval_set);
double eval_rank_accuracy(const ModelParams& params, const std::vector<PreparedExample>& eval_set);

// Versioned textual checkpoint; values are hexfloats, so save/load round-trips
// bit-exactly.
void save_checkpoint(const ModelParams& params, const std::string& path,
                     const std::string& header_echo);
ModelParams load_checkpoint(const std::string& path);

void write_loss_log_csv(const std::string& path, const std::vector<LossRow>& log,
                        const std::string& header_echo);
void write_eval_log_csv(const std::string& path, const std::vector<EvalRow>& log,
                        const std::string& header_echo);

} // namespace kgmask
