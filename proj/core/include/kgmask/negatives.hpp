#pragma once

#include "kgmask/kg.hpp"
#include "kgmask/rng.hpp"

#include <vector>

namespace kgmask {

// Draws k distractor entities for `positive`, without replacement, from the
// KG vocabulary minus ({positive} ∪ exclude). Sibling entities of the
// positive carry weight 2, everything else weight 1. `exclude` must be
// sorted. Throws DataError naming the pool size when fewer than k candidates
// remain.
std::vector<EntityId> sample_negative(const KnowledgeGraph& kg, EntityId positive,
                                      const std::vector<EntityId>& exclude_sorted, int k, Rng& rng);

} // namespace kgmask
