#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgmask {

using EntityId = int32_t;
using RelationId = int32_t;

struct Triple {
    EntityId head;
    RelationId rel;
    EntityId tail;

    bool operator==(const Triple&) const = default;
    bool operator<(const Triple& o) const {
        if (head != o.head) return head < o.head;
        if (rel != o.rel) return rel < o.rel;
        return tail < o.tail;
    }
};

// Labeled triple for classification datasets (label 1 = true, 0 = corrupted).
struct LabeledTriple {
    Triple triple;
    int label = 1;
};

struct KgLoadReport {
    size_t lines = 0;
    size_t triples = 0;
    size_t duplicates = 0;
    size_t self_loops = 0;
};

enum class TripleFormat { tsv, csv };

// Immutable after load; safe to share read-only across threads.
//
// Entity surface text is stored lowercased and ids are assigned in
// first-appearance order, so a fixed input file always produces the same
// graph. Adjacency is kept once per direction: a triple (h, r, t) yields
// (t, r, out) under h and (h, r, in) under t, which makes the graph
// undirected for reachability queries.
class KnowledgeGraph {
  public:
    struct AdjEdge {
        EntityId neighbor;
        RelationId rel;
        bool out; // true: edge stored under its head
    };

    EntityId add_entity(const std::string& surface_lowercased);
    RelationId add_relation(const std::string& label);
    // Returns false for duplicates (already present).
    bool add_triple(EntityId head, RelationId rel, EntityId tail);

    size_t entity_count() const { return entity_text_.size(); }
    size_t relation_count() const { return relation_text_.size(); }
    size_t triple_count() const { return triples_.size(); }

    const std::string& entity_text(EntityId e) const;
    const std::string& relation_text(RelationId r) const;
    std::optional<EntityId> find_entity(const std::string& surface_lowercased) const;
    std::optional<RelationId> find_relation(const std::string& label) const;

    const std::vector<Triple>& triples() const { return triples_; }
    bool has_triple(const Triple& t) const;
    const std::vector<AdjEdge>& adjacency(EntityId e) const;

    // Shortest undirected path length if <= max_hops, else nullopt.
    // distance(a, a) == 0.
    std::optional<int> undirected_distance(EntityId a, EntityId b, int max_hops) const;

    // Entities of `detected` (other than e) whose undirected distance from e
    // is < r_hop (or <= r_hop when `inclusive`). Result is sorted.
    std::vector<EntityId> neighborhood(EntityId e, const std::vector<EntityId>& detected,
                                       int r_hop, bool inclusive = false) const;

    // Entities sharing a (neighbor, relation, direction) triple slot with e:
    // some (x, r, e) and (x, r, e') both present, or (e, r, x) and (e', r, x).
    // Result is sorted and excludes e itself.
    std::vector<EntityId> siblings(EntityId e) const;

  private:
    void check_entity(EntityId e) const;

    std::vector<std::string> entity_text_;
    std::vector<std::string> relation_text_;
    std::unordered_map<std::string, EntityId> entity_id_;
    std::unordered_map<std::string, RelationId> relation_id_;
    std::vector<Triple> triples_;
    std::unordered_map<uint64_t, std::vector<Triple>> triple_set_; // dedup buckets
    std::vector<std::vector<AdjEdge>> adj_;
};

// Loads a triple file: UTF-8, one triple per line, exactly three fields
// separated by tab (tsv) or comma (csv), no header. Duplicate triples are
// dropped, self-loops kept and counted.
KnowledgeGraph load_triples(const std::string& path, TripleFormat format,
                            KgLoadReport* report = nullptr);

// Same format plus an optional fourth 0/1 label field (default 1). New
// entities/relations are appended to `kg` so ids stay stable across files.
std::vector<LabeledTriple> load_labeled_triples(const std::string& path, TripleFormat format,
                                                KnowledgeGraph& kg);

TripleFormat triple_format_from_string(const std::string& s);

} // namespace kgmask
