#pragma once

#include "kgmask/kg.hpp"
#include "kgmask/model.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace kgmask {

enum class RankBasis { probability, logit };
enum class CorruptSide { head, tail, both };

RankBasis rank_basis_from_string(const std::string& s);
CorruptSide corrupt_side_from_string(const std::string& s);

// Rank of one query triple among its filtered corruptions. Tied scores place
// the true triple at the mean rank of its tie group, so the rank is a real
// number >= 1 (integral whenever scores are tie-free).
struct RankResult {
    Triple triple;
    double rank = 1.0;
    RankBasis basis = RankBasis::probability;
};

struct KbcMetrics {
    double mr = 0.0;
    double mrr = 0.0;
    std::map<int, double> hits; // N -> fraction of ranks <= N, N in {1, 3, 10}
    size_t queries = 0;

    std::string to_kv_block() const;
};

// Plausibility score of a triple: the head text with the relation label
// appended is the context side, the tail text the entity side, both encoded
// through the entity encoder and compared with the trained bilinear scorer.
// probability squashes the raw score through a logistic; logit returns it
// unchanged. Both induce the same candidate ordering.
double score_triple(const ModelParams& params, const KnowledgeGraph& kg, const Triple& triple,
                    RankBasis basis);

// Filtered-setting link prediction: for each test triple and corruption side,
// the true entity is ranked among all KG entities, excluding candidates whose
// corrupted triple appears in `known_true` (train + dev + test).
KbcMetrics filtered_link_prediction(const ModelParams& params, const KnowledgeGraph& kg,
                                    const std::vector<Triple>& test,
                                    const std::set<Triple>& known_true, CorruptSide side,
                                    RankBasis basis, std::vector<RankResult>* ranks = nullptr);

KbcMetrics metrics_from_ranks(const std::vector<double>& ranks);

struct TripleClassificationResult {
    double threshold = 0.0;
    double dev_accuracy = 0.0;
    double test_accuracy = 0.0;
};

// Chooses the score threshold maximizing dev accuracy (scanning midpoints of
// the sorted dev scores plus both outer sentinels), then applies it to test.
TripleClassificationResult triple_classification(const ModelParams& params,
                                                 const KnowledgeGraph& kg,
                                                 const std::vector<LabeledTriple>& dev,
                                                 const std::vector<LabeledTriple>& test,
                                                 RankBasis basis);

// Threshold scan over precomputed scores (also the test oracle surface).
std::pair<double, double> best_threshold(const std::vector<std::pair<double, int>>& scored_dev);

} // namespace kgmask
