#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kgmask/errors.hpp"
#include "kgmask/negatives.hpp"
#include "kgmask/rng.hpp"

#include <cmath>
#include <map>

using namespace kgmask;

namespace {

// positive = 0; siblings of 0 are {1, 2} via shared (3, r0, tail) slot;
// entity 4 shares the neighbor but not the relation; 5 is unrelated.
KnowledgeGraph sibling_graph() {
    KnowledgeGraph kg;
    for (int i = 0; i < 6; ++i) kg.add_entity("e" + std::to_string(i));
    kg.add_relation("r0");
    kg.add_relation("r1");
    kg.add_triple(3, 0, 0);
    kg.add_triple(3, 0, 1);
    kg.add_triple(3, 0, 2);
    kg.add_triple(3, 1, 4);
    return kg;
}

} // namespace

TEST_CASE("sibling draws are twice as likely per entity (2:2:1 enumeration)") {
    // siblings {1, 2} weight 2, non-siblings {3, 4, 5} weight 1 -> restrict
    // the pool with exclude so the enumerated case is weights 2:2:1.
    const auto kg = sibling_graph();
    Rng rng(4711);
    std::map<EntityId, size_t> counts;
    const int trials = 100000;
    const std::vector<EntityId> exclude = {3, 4}; // sorted
    for (int t = 0; t < trials; ++t) {
        const auto negs = sample_negative(kg, 0, exclude, 1, rng);
        REQUIRE(negs.size() == 1);
        ++counts[negs[0]];
    }
    const double f1 = static_cast<double>(counts[1]) / trials;
    const double f2 = static_cast<double>(counts[2]) / trials;
    const double f5 = static_cast<double>(counts[5]) / trials;
    CHECK(std::abs(f1 - 0.4) < 0.01);
    CHECK(std::abs(f2 - 0.4) < 0.01);
    CHECK(std::abs(f5 - 0.2) < 0.01);
}

TEST_CASE("per-entity sibling to non-sibling frequency ratio is 2 within 5%") {
    const auto kg = sibling_graph();
    Rng rng(999);
    std::map<EntityId, size_t> counts;
    const int trials = 100000;
    for (int t = 0; t < trials; ++t) ++counts[sample_negative(kg, 0, {}, 1, rng)[0]];
    // siblings: 1, 2; non-siblings: 3, 4, 5
    const double sib = (static_cast<double>(counts[1]) + counts[2]) / 2.0;
    const double non = (static_cast<double>(counts[3]) + counts[4] + counts[5]) / 3.0;
    const double ratio = sib / non;
    CHECK(std::abs(ratio - 2.0) / 2.0 < 0.05);
}

TEST_CASE("no siblings means uniform sampling") {
    KnowledgeGraph kg;
    for (int i = 0; i < 5; ++i) kg.add_entity("e" + std::to_string(i));
    kg.add_relation("r");
    kg.add_triple(0, 0, 1);
    Rng rng(5);
    std::map<EntityId, size_t> counts;
    const int trials = 40000;
    for (int t = 0; t < trials; ++t) ++counts[sample_negative(kg, 0, {}, 1, rng)[0]];
    for (EntityId e = 1; e < 5; ++e)
        CHECK(std::abs(static_cast<double>(counts[e]) / trials - 0.25) < 0.02);
}

TEST_CASE("exclusion can force a deterministic outcome") {
    const auto kg = sibling_graph();
    Rng rng(1);
    const std::vector<EntityId> exclude = {1, 2, 3, 4};
    for (int t = 0; t < 50; ++t) {
        const auto negs = sample_negative(kg, 0, exclude, 1, rng);
        REQUIRE(negs.size() == 1);
        CHECK(negs[0] == 5);
    }
}

TEST_CASE("negatives never equal the positive nor intersect exclude") {
    const auto kg = sibling_graph();
    Rng rng(321);
    const std::vector<EntityId> exclude = {2, 4};
    for (int t = 0; t < 5000; ++t) {
        const auto negs = sample_negative(kg, 0, exclude, 2, rng);
        for (EntityId n : negs) {
            CHECK(n != 0);
            CHECK(n != 2);
            CHECK(n != 4);
        }
        CHECK(negs[0] != negs[1]); // without replacement
    }
}

TEST_CASE("pool smaller than k names the pool size") {
    const auto kg = sibling_graph();
    Rng rng(8);
    try {
        sample_negative(kg, 0, {1, 2, 3, 4}, 2, rng);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
}

TEST_CASE("fixed seed gives identical draws") {
    const auto kg = sibling_graph();
    Rng a(777), b(777);
    for (int t = 0; t < 100; ++t)
        CHECK(sample_negative(kg, 0, {}, 3, a) == sample_negative(kg, 0, {}, 3, b));
}
