#include "kgmask/kg.hpp"

#include "kgmask/errors.hpp"
#include "kgmask/text.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>

namespace kgmask {

namespace {

uint64_t triple_key(const Triple& t) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    mix(static_cast<uint64_t>(t.head));
    mix(static_cast<uint64_t>(t.rel));
    mix(static_cast<uint64_t>(t.tail));
    return h;
}

std::string trim_field(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(trim_field(line.substr(start)));
            break;
        }
        out.push_back(trim_field(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

} // namespace

EntityId KnowledgeGraph::add_entity(const std::string& surface) {
    auto it = entity_id_.find(surface);
    if (it != entity_id_.end()) return it->second;
    EntityId id = static_cast<EntityId>(entity_text_.size());
    entity_text_.push_back(surface);
    entity_id_.emplace(surface, id);
    adj_.emplace_back();
    return id;
}

RelationId KnowledgeGraph::add_relation(const std::string& label) {
    auto it = relation_id_.find(label);
    if (it != relation_id_.end()) return it->second;
    RelationId id = static_cast<RelationId>(relation_text_.size());
    relation_text_.push_back(label);
    relation_id_.emplace(label, id);
    return id;
}

bool KnowledgeGraph::add_triple(EntityId head, RelationId rel, EntityId tail) {
    check_entity(head);
    check_entity(tail);
    Triple t{head, rel, tail};
    auto& bucket = triple_set_[triple_key(t)];
    if (std::find(bucket.begin(), bucket.end(), t) != bucket.end()) return false;
    bucket.push_back(t);
    triples_.push_back(t);
    adj_[head].push_back({tail, rel, true});
    adj_[tail].push_back({head, rel, false});
    return true;
}

const std::string& KnowledgeGraph::entity_text(EntityId e) const {
    check_entity(e);
    return entity_text_[static_cast<size_t>(e)];
}

const std::string& KnowledgeGraph::relation_text(RelationId r) const {
    if (r < 0 || static_cast<size_t>(r) >= relation_text_.size())
        throw DataError("unknown relation id: " + std::to_string(r));
    return relation_text_[static_cast<size_t>(r)];
}

std::optional<EntityId> KnowledgeGraph::find_entity(const std::string& surface) const {
    auto it = entity_id_.find(surface);
    if (it == entity_id_.end()) return std::nullopt;
    return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(const std::string& label) const {
    auto it = relation_id_.find(label);
    if (it == relation_id_.end()) return std::nullopt;
    return it->second;
}

bool KnowledgeGraph::has_triple(const Triple& t) const {
    auto it = triple_set_.find(triple_key(t));
    if (it == triple_set_.end()) return false;
    return std::find(it->second.begin(), it->second.end(), t) != it->second.end();
}

const std::vector<KnowledgeGraph::AdjEdge>& KnowledgeGraph::adjacency(EntityId e) const {
    check_entity(e);
    return adj_[static_cast<size_t>(e)];
}

void KnowledgeGraph::check_entity(EntityId e) const {
    if (e < 0 || static_cast<size_t>(e) >= entity_text_.size())
        throw DataError("unknown entity id: " + std::to_string(e));
}

std::optional<int> KnowledgeGraph::undirected_distance(EntityId a, EntityId b, int max_hops) const {
    check_entity(a);
    check_entity(b);
    if (a == b) return 0;
    if (max_hops < 1) return std::nullopt;
    // BFS truncated at max_hops levels.
    std::vector<int> dist(entity_text_.size(), -1);
    std::deque<EntityId> queue;
    dist[static_cast<size_t>(a)] = 0;
    queue.push_back(a);
    while (!queue.empty()) {
        EntityId cur = queue.front();
        queue.pop_front();
        int d = dist[static_cast<size_t>(cur)];
        if (d >= max_hops) continue;
        for (const AdjEdge& edge : adj_[static_cast<size_t>(cur)]) {
            if (dist[static_cast<size_t>(edge.neighbor)] != -1) continue;
            dist[static_cast<size_t>(edge.neighbor)] = d + 1;
            if (edge.neighbor == b) return d + 1;
            queue.push_back(edge.neighbor);
        }
    }
    return std::nullopt;
}

std::vector<EntityId> KnowledgeGraph::neighborhood(EntityId e, const std::vector<EntityId>& detected,
                                                   int r_hop, bool inclusive) const {
    check_entity(e);
    if (r_hop < 1) throw UsageError("r_hop must be >= 1");
    const int max_depth = inclusive ? r_hop : r_hop - 1;
    std::set<EntityId> detected_set(detected.begin(), detected.end());
    detected_set.erase(e);
    std::vector<EntityId> out;
    if (detected_set.empty() || max_depth < 1) return out;

    std::vector<int> dist(entity_text_.size(), -1);
    std::deque<EntityId> queue;
    dist[static_cast<size_t>(e)] = 0;
    queue.push_back(e);
    while (!queue.empty()) {
        EntityId cur = queue.front();
        queue.pop_front();
        int d = dist[static_cast<size_t>(cur)];
        if (d >= max_depth) continue;
        for (const AdjEdge& edge : adj_[static_cast<size_t>(cur)]) {
            if (dist[static_cast<size_t>(edge.neighbor)] != -1) continue;
            dist[static_cast<size_t>(edge.neighbor)] = d + 1;
            queue.push_back(edge.neighbor);
        }
    }
    for (EntityId d : detected_set) {
        int dd = dist[static_cast<size_t>(d)];
        if (dd > 0) out.push_back(d);
    }
    return out; // detected_set is ordered, so out is sorted
}

std::vector<EntityId> KnowledgeGraph::siblings(EntityId e) const {
    check_entity(e);
    std::set<EntityId> out;
    for (const AdjEdge& edge : adj_[static_cast<size_t>(e)]) {
        // edge.out: (e, r, x). Siblings are heads e' with (e', r, x).
        // !edge.out: (x, r, e). Siblings are tails e' with (x, r, e').
        EntityId x = edge.neighbor;
        for (const AdjEdge& other : adj_[static_cast<size_t>(x)]) {
            if (other.rel != edge.rel) continue;
            if (edge.out && !other.out && other.neighbor != e) out.insert(other.neighbor);
            if (!edge.out && other.out && other.neighbor != e) out.insert(other.neighbor);
        }
    }
    return {out.begin(), out.end()};
}

KnowledgeGraph load_triples(const std::string& path, TripleFormat format, KgLoadReport* report) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open triple file: " + path);
    const char sep = format == TripleFormat::tsv ? '\t' : ',';
    KnowledgeGraph kg;
    KgLoadReport rep;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        chomp_cr(line);
        if (line.empty()) continue;
        ++rep.lines;
        auto fields = split_fields(line, sep);
        if (fields.size() != 3)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 fields, got " +
                            std::to_string(fields.size()));
        if (fields[0].empty() || fields[1].empty() || fields[2].empty())
            throw DataError(path + ":" + std::to_string(lineno) + ": empty field");
        EntityId h = kg.add_entity(to_lower(fields[0]));
        RelationId r = kg.add_relation(to_lower(fields[1]));
        EntityId t = kg.add_entity(to_lower(fields[2]));
        if (h == t) ++rep.self_loops;
        if (kg.add_triple(h, r, t))
            ++rep.triples;
        else
            ++rep.duplicates;
    }
    if (rep.lines == 0) throw DataError("empty triple file: " + path);
    if (report) *report = rep;
    return kg;
}

std::vector<LabeledTriple> load_labeled_triples(const std::string& path, TripleFormat format,
                                                KnowledgeGraph& kg) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open triple file: " + path);
    const char sep = format == TripleFormat::tsv ? '\t' : ',';
    std::vector<LabeledTriple> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        chomp_cr(line);
        if (line.empty()) continue;
        auto fields = split_fields(line, sep);
        if (fields.size() != 3 && fields.size() != 4)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 or 4 fields, got " +
                            std::to_string(fields.size()));
        if (fields[0].empty() || fields[1].empty() || fields[2].empty())
            throw DataError(path + ":" + std::to_string(lineno) + ": empty field");
        int label = 1;
        if (fields.size() == 4) {
            if (fields[3] == "1")
                label = 1;
            else if (fields[3] == "0")
                label = 0;
            else
                throw DataError(path + ":" + std::to_string(lineno) + ": label must be 0 or 1, got '" +
                                fields[3] + "'");
        }
        EntityId h = kg.add_entity(to_lower(fields[0]));
        RelationId r = kg.add_relation(to_lower(fields[1]));
        EntityId t = kg.add_entity(to_lower(fields[2]));
        out.push_back({Triple{h, r, t}, label});
    }
    if (out.empty()) throw DataError("empty triple file: " + path);
    return out;
}

TripleFormat triple_format_from_string(const std::string& s) {
    if (s == "tsv") return TripleFormat::tsv;
    if (s == "csv") return TripleFormat::csv;
    throw UsageError("unknown triple format: '" + s + "' (expected tsv or csv)");
}

} // namespace kgmask
