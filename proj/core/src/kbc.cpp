#include "kgmask/kbc.hpp"

#include "kgmask/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace kgmask {

RankBasis rank_basis_from_string(const std::string& s) {
    if (s == "probability") return RankBasis::probability;
    if (s == "logit") return RankBasis::logit;
    throw UsageError("unknown ranking basis: '" + s + "' (expected probability or logit)");
}

CorruptSide corrupt_side_from_string(const std::string& s) {
    if (s == "head") return CorruptSide::head;
    if (s == "tail") return CorruptSide::tail;
    if (s == "both") return CorruptSide::both;
    throw UsageError("unknown corruption side: '" + s + "' (expected head, tail or both)");
}

std::string KbcMetrics::to_kv_block() const {
    char buf[64];
    std::string s;
    auto kv = [&](const char* k, double v) {
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        s += std::string(k) + "=" + buf + "\n";
    };
    s += "queries=" + std::to_string(queries) + "\n";
    kv("MR", mr);
    kv("MRR", mrr);
    for (const auto& [n, frac] : hits) {
        std::snprintf(buf, sizeof(buf), "%.6f", frac);
        s += "hits@" + std::to_string(n) + "=" + buf + "\n";
    }
    return s;
}

namespace {

// Context side of the scorer: head surface text with the relation label
// appended before encoding.
std::string head_relation_text(const KnowledgeGraph& kg, EntityId head, RelationId rel) {
    return kg.entity_text(head) + " " + kg.relation_text(rel);
}

double raw_score(const ModelParams& params, const Vec& v_ctx, const Vec& u_tail) {
    return bilinear_score(params.scorer, v_ctx, u_tail);
}

double apply_basis(double s, RankBasis basis) {
    return basis == RankBasis::probability ? logistic(s) : s;
}

// Mean rank of the tie group containing the true candidate.
double tie_aware_rank(double true_score, const std::vector<double>& candidate_scores) {
    size_t greater = 0, ties = 0;
    for (double s : candidate_scores) {
        if (s > true_score) ++greater;
        else if (s == true_score) ++ties;
    }
    // `ties` counts the true candidate itself.
    return static_cast<double>(greater) + (static_cast<double>(ties) + 1.0) / 2.0;
}

} // namespace

double score_triple(const ModelParams& params, const KnowledgeGraph& kg, const Triple& triple,
                    RankBasis basis) {
    const Vec v = entity_embedding(
        encode_entity(params, head_relation_text(kg, triple.head, triple.rel)));
    const Vec u = entity_embedding(encode_entity(params, kg.entity_text(triple.tail)));
    return apply_basis(raw_score(params, v, u), basis);
}

KbcMetrics filtered_link_prediction(const ModelParams& params, const KnowledgeGraph& kg,
                                    const std::vector<Triple>& test,
                                    const std::set<Triple>& known_true, CorruptSide side,
                                    RankBasis basis, std::vector<RankResult>* rank_results) {
    if (test.empty()) throw DataError("filtered_link_prediction: empty test set");
    const EntityId n_entities = static_cast<EntityId>(kg.entity_count());

    // Entity embeddings are query-independent; compute them once.
    std::vector<Vec> entity_emb(static_cast<size_t>(n_entities));
    for (EntityId e = 0; e < n_entities; ++e)
        entity_emb[static_cast<size_t>(e)] =
            entity_embedding(encode_entity(params, kg.entity_text(e)));

    std::vector<double> ranks;
    auto rank_query = [&](const Triple& query, bool corrupt_tail) {
        std::vector<double> scores;
        double true_score = 0.0;
        if (corrupt_tail) {
            const Vec v = entity_embedding(
                encode_entity(params, head_relation_text(kg, query.head, query.rel)));
            for (EntityId e = 0; e < n_entities; ++e) {
                const Triple candidate{query.head, query.rel, e};
                if (e != query.tail && known_true.count(candidate)) continue; // filtered
                const double s = apply_basis(raw_score(params, v, entity_emb[static_cast<size_t>(e)]), basis);
                if (e == query.tail) true_score = s;
                scores.push_back(s);
            }
        } else {
            const Vec u = entity_emb[static_cast<size_t>(query.tail)];
            for (EntityId e = 0; e < n_entities; ++e) {
                const Triple candidate{e, query.rel, query.tail};
                if (e != query.head && known_true.count(candidate)) continue;
                const Vec v = entity_embedding(
                    encode_entity(params, head_relation_text(kg, e, query.rel)));
                const double s = apply_basis(raw_score(params, v, u), basis);
                if (e == query.head) true_score = s;
                scores.push_back(s);
            }
        }
        const double rank = tie_aware_rank(true_score, scores);
        ranks.push_back(rank);
        if (rank_results) rank_results->push_back({query, rank, basis});
    };

    for (const Triple& t : test) {
        if (side == CorruptSide::tail || side == CorruptSide::both) rank_query(t, true);
        if (side == CorruptSide::head || side == CorruptSide::both) rank_query(t, false);
    }
    return metrics_from_ranks(ranks);
}

KbcMetrics metrics_from_ranks(const std::vector<double>& ranks) {
    if (ranks.empty()) throw DataError("metrics_from_ranks: no ranks");
    KbcMetrics m;
    m.queries = ranks.size();
    double sum = 0.0, rsum = 0.0;
    std::map<int, size_t> hit_counts{{1, 0}, {3, 0}, {10, 0}};
    for (double r : ranks) {
        sum += r;
        rsum += 1.0 / r;
        for (auto& [n, c] : hit_counts)
            if (r <= static_cast<double>(n)) ++c;
    }
    m.mr = sum / static_cast<double>(ranks.size());
    m.mrr = rsum / static_cast<double>(ranks.size());
    for (const auto& [n, c] : hit_counts)
        m.hits[n] = static_cast<double>(c) / static_cast<double>(ranks.size());
    return m;
}

std::pair<double, double> best_threshold(const std::vector<std::pair<double, int>>& scored_dev) {
    if (scored_dev.empty()) throw DataError("best_threshold: empty dev set");
    bool has_pos = false, has_neg = false;
    for (const auto& [_, label] : scored_dev) (label ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw DataError("best_threshold: dev set must contain both labels");

    std::vector<double> scores;
    for (const auto& [s, _] : scored_dev) scores.push_back(s);
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

    std::vector<double> thresholds;
    thresholds.push_back(scores.front() - 1.0); // classify everything positive
    for (size_t i = 0; i + 1 < scores.size(); ++i)
        thresholds.push_back(0.5 * (scores[i] + scores[i + 1]));
    thresholds.push_back(scores.back() + 1.0); // classify everything negative

    double best_t = thresholds.front();
    double best_acc = -1.0;
    for (double t : thresholds) {
        size_t correct = 0;
        for (const auto& [s, label] : scored_dev) {
            const int predicted = s > t ? 1 : 0;
            if (predicted == label) ++correct;
        }
        const double acc = static_cast<double>(correct) / static_cast<double>(scored_dev.size());
        if (acc > best_acc) {
            best_acc = acc;
            best_t = t;
        }
    }
    return {best_t, best_acc};
}

TripleClassificationResult triple_classification(const ModelParams& params,
                                                 const KnowledgeGraph& kg,
                                                 const std::vector<LabeledTriple>& dev,
                                                 const std::vector<LabeledTriple>& test,
                                                 RankBasis basis) {
    if (dev.empty()) throw DataError("triple_classification: empty dev set");
    if (test.empty()) throw DataError("triple_classification: empty test set");
    std::vector<std::pair<double, int>> scored_dev;
    for (const auto& lt : dev)
        scored_dev.emplace_back(score_triple(params, kg, lt.triple, basis), lt.label);
    auto [threshold, dev_acc] = best_threshold(scored_dev);

    size_t correct = 0;
    for (const auto& lt : test) {
        const double s = score_triple(params, kg, lt.triple, basis);
        const int predicted = s > threshold ? 1 : 0;
        if (predicted == lt.label) ++correct;
    }
    TripleClassificationResult result;
    result.threshold = threshold;
    result.dev_accuracy = dev_acc;
    result.test_accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    return result;
}

} // namespace kgmask
