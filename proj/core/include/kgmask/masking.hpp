#pragma once

#include "kgmask/config.hpp"
#include "kgmask/linker.hpp"
#include "kgmask/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kgmask {

// Per-entity document counts plus the high-frequency cutoff R_thresh.
// An entity with df >= threshold is "trivial" and excluded from
// entity-branch masking.
struct DocumentFrequencyTable {
    std::vector<uint32_t> df; // indexed by entity id
    uint64_t total_documents = 0;
    uint32_t threshold = 1;

    uint32_t count(EntityId e) const {
        return static_cast<size_t>(e) < df.size() ? df[static_cast<size_t>(e)] : 0;
    }
    bool trivial(EntityId e) const { return count(e) >= threshold; }
};

// Smallest value v such that the fraction of nonzero-df entities with
// df >= v is <= (1 - quantile). With no nonzero counts the threshold is 1.
uint32_t df_threshold(const std::vector<uint32_t>& nonzero_dfs, double quantile);

// Counts documents per entity given each document's set of linked entities.
DocumentFrequencyTable document_frequency(const std::vector<std::vector<EntityId>>& docs_entities,
                                          size_t entity_count, double quantile);

enum class SpanKind : uint8_t { entity, random_span };
enum class Corruption : uint8_t { mask_token, random_token, keep };

struct PlanSpan {
    int32_t start;
    int32_t end;
    SpanKind kind;
    EntityId entity; // -1 for random spans
    Corruption corruption;
};

// Selected spans in selection order; the final span is the one that crossed
// the budget, kept whole.
struct MaskPlan {
    std::vector<PlanSpan> spans;
    int32_t budget_tokens = 0;

    int32_t covered_tokens() const;
    std::vector<int32_t> masked_positions() const; // sorted union of span indices
};

// Eq-style masking weight: 0 when the entity is document-frequency trivial,
// otherwise the neighborhood size clamped into [r_min, r_max].
double entity_mask_weight(EntityId e, const DocumentFrequencyTable& df, size_t nbhd_size,
                          const MaskingConfig& cfg);

// Iterative budget sampler: ~80% of draws take an unused, non-overlapping
// mention proportionally to its weight (without replacement), the rest take
// a geometric random span; stops once covered >= ceil(budget_fraction * n).
// Sequences shorter than 2 tokens yield an empty plan.
MaskPlan sample_mask_plan(const std::vector<std::string>& tokens,
                          const std::vector<MentionSpan>& mentions,
                          const std::vector<double>& weights, const MaskingConfig& cfg, Rng& rng);

// Applies each span's corruption mode to all of its tokens: [MASK], an i.i.d.
// random vocabulary token, or keep. `random_vocab` must not contain special
// tokens.
std::vector<std::string> apply_corruption(const std::vector<std::string>& tokens,
                                          const MaskPlan& plan,
                                          const std::vector<std::string>& random_vocab, Rng& rng);

// A text is worth keeping iff some mention's weight exceeds r_min, i.e. it
// has at least one non-trivial entity with detected neighbors.
bool filter_text(const std::vector<MentionSpan>& mentions, const std::vector<double>& weights,
                 double r_min);

extern const std::string kMaskToken; // "[MASK]"

} // namespace kgmask
