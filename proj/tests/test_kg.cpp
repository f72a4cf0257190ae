#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kgmask/errors.hpp"
#include "kgmask/kg.hpp"
#include "kgmask/rng.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace kgmask;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path.string();
}

// Entities named e0..e{n-1}; edges as (head, rel, tail) index triples.
KnowledgeGraph make_graph(int n, const std::vector<std::tuple<int, int, int>>& edges) {
    KnowledgeGraph kg;
    for (int i = 0; i < n; ++i) kg.add_entity("e" + std::to_string(i));
    int max_rel = 0;
    for (const auto& [h, r, t] : edges) max_rel = std::max(max_rel, r);
    for (int r = 0; r <= max_rel; ++r) kg.add_relation("r" + std::to_string(r));
    for (const auto& [h, r, t] : edges) kg.add_triple(h, r, t);
    return kg;
}

// Independent all-pairs oracle: Floyd-Warshall over the undirected edge set.
std::vector<std::vector<int>> floyd_warshall(int n, const std::vector<std::tuple<int, int, int>>& edges) {
    const int inf = 1 << 20;
    std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
    for (int i = 0; i < n; ++i) d[i][i] = 0;
    for (const auto& [h, r, t] : edges) {
        d[h][t] = std::min(d[h][t], 1);
        d[t][h] = std::min(d[t][h], 1);
    }
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
    return d;
}

} // namespace

TEST_CASE("load_triples basic construction") {
    const auto path = write_temp("kg_basic.csv", "a,r1,b\nb,r1,c\n");
    KgLoadReport rep;
    const auto kg = load_triples(path, TripleFormat::csv, &rep);
    CHECK(kg.entity_count() == 3);
    CHECK(kg.relation_count() == 1);
    CHECK(kg.triple_count() == 2);
    CHECK(rep.duplicates == 0);
    // first-appearance id order
    CHECK(kg.entity_text(0) == "a");
    CHECK(kg.entity_text(1) == "b");
    CHECK(kg.entity_text(2) == "c");
}

TEST_CASE("load_triples deduplicates") {
    const auto path = write_temp("kg_dup.csv", "a,r1,b\na,r1,b\n");
    KgLoadReport rep;
    const auto kg = load_triples(path, TripleFormat::csv, &rep);
    CHECK(kg.triple_count() == 1);
    CHECK(rep.duplicates == 1);
}

TEST_CASE("load_triples surface text is lowercased") {
    const auto path = write_temp("kg_case.csv", "Apple,R1,Banana\napple,r1,banana\n");
    const auto kg = load_triples(path, TripleFormat::csv);
    CHECK(kg.entity_count() == 2);
    CHECK(kg.triple_count() == 1);
}

TEST_CASE("load_triples malformed row names the line") {
    const auto path = write_temp("kg_bad.csv", "a,r1,b\na,r1\n");
    try {
        load_triples(path, TripleFormat::csv);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("load_triples empty file is an error") {
    const auto path = write_temp("kg_empty.csv", "");
    CHECK_THROWS_AS(load_triples(path, TripleFormat::csv), DataError);
}

TEST_CASE("load_triples tsv format and self-loop flagging") {
    const auto path = write_temp("kg_self.tsv", "a\tr1\ta\nb\tr1\tc\n");
    KgLoadReport rep;
    const auto kg = load_triples(path, TripleFormat::tsv, &rep);
    CHECK(kg.triple_count() == 2);
    CHECK(rep.self_loops == 1);
}

TEST_CASE("undirected_distance single edge and identity") {
    const auto kg = make_graph(2, {{0, 0, 1}});
    CHECK(kg.undirected_distance(0, 1, 3) == 1);
    CHECK(kg.undirected_distance(0, 0, 3) == 0);
}

TEST_CASE("undirected_distance respects max_hops on a chain") {
    // a-b-c-d-e: true distance 4, bound 3 -> absent
    const auto kg = make_graph(5, {{0, 0, 1}, {1, 0, 2}, {2, 0, 3}, {3, 0, 4}});
    CHECK_FALSE(kg.undirected_distance(0, 4, 3).has_value());
    CHECK(kg.undirected_distance(0, 4, 4) == 4);
    CHECK(kg.undirected_distance(0, 3, 3) == 3);
}

TEST_CASE("undirected_distance unknown id is an error") {
    const auto kg = make_graph(2, {{0, 0, 1}});
    CHECK_THROWS_AS(kg.undirected_distance(0, 9, 3), DataError);
}

TEST_CASE("distance is symmetric (exhaustive on random graphs up to 50 nodes)") {
    Rng rng(7);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 5 + static_cast<int>(rng.uniform_index(46));
        std::vector<std::tuple<int, int, int>> edges;
        const int m = n + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(2 * n)));
        for (int i = 0; i < m; ++i) {
            int h = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n)));
            int t = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n)));
            edges.emplace_back(h, 0, t);
        }
        const auto kg = make_graph(n, edges);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                CHECK(kg.undirected_distance(a, b, n) == kg.undirected_distance(b, a, n));
    }
}

TEST_CASE("distance equals Floyd-Warshall on random graphs up to 30 nodes") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 4 + static_cast<int>(rng.uniform_index(27));
        std::vector<std::tuple<int, int, int>> edges;
        const int m = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(3 * n))) + 1;
        for (int i = 0; i < m; ++i) {
            int h = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n)));
            int t = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n)));
            edges.emplace_back(h, static_cast<int>(rng.uniform_index(3)), t);
        }
        const auto kg = make_graph(n, edges);
        const auto oracle = floyd_warshall(n, edges);
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                const auto got = kg.undirected_distance(a, b, n);
                if (oracle[a][b] >= (1 << 20)) {
                    CHECK_FALSE(got.has_value());
                } else {
                    REQUIRE(got.has_value());
                    CHECK(*got == oracle[a][b]);
                }
            }
        }
    }
}

TEST_CASE("neighborhood uses strict inequality") {
    // A-B, B-C: d(A,B)=1, d(A,C)=2, both < 3
    const auto kg = make_graph(3, {{0, 0, 1}, {1, 0, 2}});
    CHECK(kg.neighborhood(0, {0, 1, 2}, 3) == std::vector<EntityId>{1, 2});
    // strict: d(A,C)=2 is NOT < 2
    CHECK(kg.neighborhood(0, {0, 1, 2}, 2) == std::vector<EntityId>{1});
    // inclusive variant: d <= 2
    CHECK(kg.neighborhood(0, {0, 1, 2}, 2, true) == std::vector<EntityId>{1, 2});
}

TEST_CASE("neighborhood with no other detected entities is empty") {
    const auto kg = make_graph(3, {{0, 0, 1}, {1, 0, 2}});
    CHECK(kg.neighborhood(0, {0}, 3).empty());
}

TEST_CASE("neighborhood of an unreachable detected entity is empty") {
    // A and D in separate components
    const auto kg = make_graph(4, {{0, 0, 1}, {2, 0, 3}});
    CHECK(kg.neighborhood(0, {0, 3}, 3).empty());
}

TEST_CASE("neighborhood is a subset of detected minus self") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 6 + static_cast<int>(rng.uniform_index(20));
        std::vector<std::tuple<int, int, int>> edges;
        for (int i = 0; i < 2 * n; ++i)
            edges.emplace_back(static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n))), 0,
                               static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n))));
        const auto kg = make_graph(n, edges);
        std::vector<EntityId> detected;
        for (int e = 0; e < n; ++e)
            if (rng.bernoulli(0.5)) detected.push_back(e);
        if (detected.empty()) continue;
        const EntityId probe = detected[rng.uniform_index(detected.size())];
        for (EntityId x : kg.neighborhood(probe, detected, 3)) {
            CHECK(x != probe);
            CHECK(std::find(detected.begin(), detected.end(), x) != detected.end());
        }
    }
}

TEST_CASE("siblings share a (neighbor, relation, direction) slot") {
    // (h,r,a),(h,r,b) -> siblings(a) = {b}
    const auto kg = make_graph(3, {{0, 0, 1}, {0, 0, 2}});
    CHECK(kg.siblings(1) == std::vector<EntityId>{2});
    CHECK(kg.siblings(2) == std::vector<EntityId>{1});
}

TEST_CASE("siblings require the same relation") {
    // (a,r,t),(b,r,t),(c,q,t): siblings(a) = {b}
    const auto kg = make_graph(4, {{0, 0, 3}, {1, 0, 3}, {2, 1, 3}});
    CHECK(kg.siblings(0) == std::vector<EntityId>{1});
}

TEST_CASE("siblings require the same direction") {
    // (x,r,a) and (b,r,x): a is a tail of x, b is a head into x
    const auto kg = make_graph(3, {{2, 0, 0}, {1, 0, 2}});
    CHECK(kg.siblings(0).empty());
    CHECK(kg.siblings(1).empty());
}

TEST_CASE("entity with no shared slot has no siblings") {
    const auto kg = make_graph(3, {{0, 0, 1}});
    CHECK(kg.siblings(2).empty());
}

TEST_CASE("siblings relation is symmetric on random graphs") {
    Rng rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 5 + static_cast<int>(rng.uniform_index(15));
        std::vector<std::tuple<int, int, int>> edges;
        for (int i = 0; i < 3 * n; ++i)
            edges.emplace_back(static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n))),
                               static_cast<int>(rng.uniform_index(3)),
                               static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n))));
        const auto kg = make_graph(n, edges);
        for (int a = 0; a < n; ++a) {
            for (EntityId b : kg.siblings(a)) {
                const auto back = kg.siblings(b);
                CHECK(std::find(back.begin(), back.end(), a) != back.end());
            }
        }
    }
}
