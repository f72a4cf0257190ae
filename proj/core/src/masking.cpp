#include "kgmask/masking.hpp"

#include "kgmask/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace kgmask {

const std::string kMaskToken = "[MASK]";

uint32_t df_threshold(const std::vector<uint32_t>& nonzero_dfs, double quantile) {
    if (nonzero_dfs.empty()) return 1;
    std::vector<uint32_t> sorted(nonzero_dfs);
    std::sort(sorted.begin(), sorted.end());
    const double budget = (1.0 - quantile) * static_cast<double>(sorted.size());
    // count_ge(v) is nonincreasing in v; scan candidate cutoffs upward.
    std::vector<uint32_t> candidates(sorted);
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    candidates.push_back(sorted.back() + 1);
    for (uint32_t v : candidates) {
        const size_t count_ge =
            sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), v);
        if (static_cast<double>(count_ge) <= budget) return v;
    }
    return sorted.back() + 1;
}

DocumentFrequencyTable document_frequency(const std::vector<std::vector<EntityId>>& docs_entities,
                                          size_t entity_count, double quantile) {
    if (docs_entities.empty()) throw DataError("document_frequency: empty corpus");
    DocumentFrequencyTable table;
    table.df.assign(entity_count, 0);
    table.total_documents = docs_entities.size();
    for (const auto& doc : docs_entities) {
        std::set<EntityId> distinct(doc.begin(), doc.end());
        for (EntityId e : distinct) {
            if (e < 0 || static_cast<size_t>(e) >= entity_count)
                throw DataError("document_frequency: entity id out of range: " + std::to_string(e));
            ++table.df[static_cast<size_t>(e)];
        }
    }
    std::vector<uint32_t> nonzero;
    for (uint32_t c : table.df)
        if (c > 0) nonzero.push_back(c);
    table.threshold = df_threshold(nonzero, quantile);
    return table;
}

double entity_mask_weight(EntityId e, const DocumentFrequencyTable& df, size_t nbhd_size,
                          const MaskingConfig& cfg) {
    if (df.trivial(e)) return 0.0;
    return std::max(cfg.r_min, std::min(static_cast<double>(nbhd_size), cfg.r_max));
}

int32_t MaskPlan::covered_tokens() const {
    int32_t total = 0;
    for (const auto& s : spans) total += s.end - s.start;
    return total;
}

std::vector<int32_t> MaskPlan::masked_positions() const {
    std::set<int32_t> positions;
    for (const auto& s : spans)
        for (int32_t i = s.start; i < s.end; ++i) positions.insert(i);
    return {positions.begin(), positions.end()};
}

namespace {

constexpr int kSpanRetries = 64;

Corruption draw_corruption(const MaskingConfig& cfg, Rng& rng) {
    const double u = rng.next_double();
    if (u < cfg.corrupt_mask) return Corruption::mask_token;
    if (u < cfg.corrupt_mask + cfg.corrupt_random) return Corruption::random_token;
    return Corruption::keep;
}

bool overlaps(const std::vector<bool>& covered, int32_t start, int32_t end) {
    for (int32_t i = start; i < end; ++i)
        if (covered[static_cast<size_t>(i)]) return true;
    return false;
}

void mark(std::vector<bool>& covered, int32_t start, int32_t end) {
    for (int32_t i = start; i < end; ++i) covered[static_cast<size_t>(i)] = true;
}

// Places one random span: uniform start, geometric length clamped at
// max_span_len and at the sequence end, resampled on overlap. After
// kSpanRetries failures falls back to the leftmost free token.
PlanSpan place_random_span(int32_t n, std::vector<bool>& covered, int32_t max_len,
                           double geometric_p, Rng& rng) {
    for (int attempt = 0; attempt < kSpanRetries; ++attempt) {
        const int32_t start = static_cast<int32_t>(rng.uniform_index(static_cast<uint64_t>(n)));
        int64_t len = rng.geometric(geometric_p);
        len = std::min<int64_t>(len, max_len);
        const int32_t end = static_cast<int32_t>(std::min<int64_t>(start + len, n));
        if (overlaps(covered, start, end)) continue;
        mark(covered, start, end);
        return {start, end, SpanKind::random_span, -1, Corruption::mask_token};
    }
    for (int32_t i = 0; i < n; ++i) {
        if (!covered[static_cast<size_t>(i)]) {
            covered[static_cast<size_t>(i)] = true;
            return {i, i + 1, SpanKind::random_span, -1, Corruption::mask_token};
        }
    }
    throw RuntimeError("mask sampler: no free token left before budget was reached");
}

// Uniform free single token (random whole-word baseline).
PlanSpan place_random_word(int32_t n, std::vector<bool>& covered, Rng& rng) {
    for (int attempt = 0; attempt < kSpanRetries; ++attempt) {
        const int32_t start = static_cast<int32_t>(rng.uniform_index(static_cast<uint64_t>(n)));
        if (covered[static_cast<size_t>(start)]) continue;
        covered[static_cast<size_t>(start)] = true;
        return {start, start + 1, SpanKind::random_span, -1, Corruption::mask_token};
    }
    for (int32_t i = 0; i < n; ++i) {
        if (!covered[static_cast<size_t>(i)]) {
            covered[static_cast<size_t>(i)] = true;
            return {i, i + 1, SpanKind::random_span, -1, Corruption::mask_token};
        }
    }
    throw RuntimeError("mask sampler: no free token left before budget was reached");
}

} // namespace

MaskPlan sample_mask_plan(const std::vector<std::string>& tokens,
                          const std::vector<MentionSpan>& mentions,
                          const std::vector<double>& weights, const MaskingConfig& cfg, Rng& rng) {
    if (weights.size() != mentions.size())
        throw UsageError("sample_mask_plan: weights not aligned with mentions");
    const int32_t n = static_cast<int32_t>(tokens.size());
    MaskPlan plan;
    if (n < 2) return plan; // degenerate case: nothing to mask
    plan.budget_tokens =
        static_cast<int32_t>(std::ceil(cfg.budget_fraction * static_cast<double>(n)));

    std::vector<bool> covered(static_cast<size_t>(n), false);
    std::vector<bool> used(mentions.size(), false);
    int32_t total = 0;

    while (total < plan.budget_tokens) {
        PlanSpan span{};
        if (cfg.scheme == MaskScheme::whole_word) {
            span = place_random_word(n, covered, rng);
        } else {
            const bool entity_branch = rng.bernoulli(cfg.entity_branch_prob);
            bool placed = false;
            if (entity_branch) {
                std::vector<size_t> candidates;
                std::vector<double> cand_weights;
                for (size_t i = 0; i < mentions.size(); ++i) {
                    if (used[i]) continue;
                    const double w =
                        cfg.scheme == MaskScheme::random_entity ? 1.0 : weights[i];
                    if (w <= 0.0) continue;
                    if (overlaps(covered, mentions[i].start, mentions[i].end)) continue;
                    candidates.push_back(i);
                    cand_weights.push_back(w);
                }
                if (!candidates.empty()) {
                    const size_t pick = candidates[rng.weighted_index(cand_weights)];
                    used[pick] = true;
                    mark(covered, mentions[pick].start, mentions[pick].end);
                    span = {mentions[pick].start, mentions[pick].end, SpanKind::entity,
                            mentions[pick].entity, Corruption::mask_token};
                    placed = true;
                }
            }
            if (!placed)
                span = place_random_span(n, covered, cfg.max_span_len, cfg.geometric_p, rng);
        }
        span.corruption = draw_corruption(cfg, rng);
        total += span.end - span.start;
        plan.spans.push_back(span);
    }
    return plan;
}

std::vector<std::string> apply_corruption(const std::vector<std::string>& tokens,
                                          const MaskPlan& plan,
                                          const std::vector<std::string>& random_vocab, Rng& rng) {
    std::vector<std::string> out(tokens);
    for (const auto& span : plan.spans) {
        if (span.start < 0 || span.end > static_cast<int32_t>(tokens.size()) || span.start >= span.end)
            throw UsageError("apply_corruption: span out of bounds");
        switch (span.corruption) {
            case Corruption::mask_token:
                for (int32_t i = span.start; i < span.end; ++i) out[static_cast<size_t>(i)] = kMaskToken;
                break;
            case Corruption::random_token:
                if (random_vocab.empty())
                    throw UsageError("apply_corruption: empty replacement vocabulary");
                for (int32_t i = span.start; i < span.end; ++i)
                    out[static_cast<size_t>(i)] =
                        random_vocab[rng.uniform_index(random_vocab.size())];
                break;
            case Corruption::keep:
                break; // tokens unchanged, positions still count as masked
        }
    }
    return out;
}

bool filter_text(const std::vector<MentionSpan>& mentions, const std::vector<double>& weights,
                 double r_min) {
    if (weights.size() != mentions.size())
        throw UsageError("filter_text: weights not aligned with mentions");
    for (double w : weights)
        if (w > r_min) return true;
    return false;
}

} // namespace kgmask
