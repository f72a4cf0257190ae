#include "kgmask/negatives.hpp"

#include "kgmask/errors.hpp"

#include <algorithm>

namespace kgmask {

std::vector<EntityId> sample_negative(const KnowledgeGraph& kg, EntityId positive,
                                      const std::vector<EntityId>& exclude_sorted, int k, Rng& rng) {
    if (k < 1) throw UsageError("sample_negative: k must be >= 1");
    const auto sibs = kg.siblings(positive); // sorted

    std::vector<EntityId> pool;
    std::vector<double> weights;
    pool.reserve(kg.entity_count());
    for (EntityId e = 0; e < static_cast<EntityId>(kg.entity_count()); ++e) {
        if (e == positive) continue;
        if (std::binary_search(exclude_sorted.begin(), exclude_sorted.end(), e)) continue;
        pool.push_back(e);
        weights.push_back(std::binary_search(sibs.begin(), sibs.end(), e) ? 2.0 : 1.0);
    }
    if (pool.size() < static_cast<size_t>(k))
        throw DataError("sample_negative: candidate pool has " + std::to_string(pool.size()) +
                        " entities, need " + std::to_string(k));

    std::vector<EntityId> out;
    out.reserve(static_cast<size_t>(k));
    for (int draw = 0; draw < k; ++draw) {
        const size_t pick = rng.weighted_index(weights);
        out.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<ptrdiff_t>(pick));
        weights.erase(weights.begin() + static_cast<ptrdiff_t>(pick));
    }
    return out;
}

} // namespace kgmask
