#include "kgmask/linker.hpp"

#include "kgmask/errors.hpp"
#include "kgmask/text.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace kgmask {

void InvertedIndex::insert(EntityId entity, std::vector<std::string> lemmas) {
    if (lemmas.empty()) throw RuntimeError("cannot index an entity with no lemmas");
    max_entity_len_ = std::max(max_entity_len_, lemmas.size());
    buckets_[lemmas.front()].push_back({entity, std::move(lemmas)});
    ++entry_count_;
}

void InvertedIndex::finalize() {
    for (auto& [_, entries] : buckets_) {
        std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            if (a.lemmas.size() != b.lemmas.size()) return a.lemmas.size() > b.lemmas.size();
            return a.entity < b.entity;
        });
    }
}

const std::vector<InvertedIndex::Entry>* InvertedIndex::bucket(const std::string& key) const {
    auto it = buckets_.find(key);
    return it == buckets_.end() ? nullptr : &it->second;
}

void InvertedIndex::save(const std::string& path, const std::string& header_echo) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write index file: " + path);
    out << "# kgmask-index v1";
    if (!header_echo.empty()) out << " | " << header_echo;
    out << "\n";
    for (const auto& [key, entries] : buckets_) {
        for (const auto& e : entries) {
            out << key << '\t' << e.entity << '\t' << join_tokens(e.lemmas) << '\n';
        }
    }
    if (!out) throw DataError("write failed: " + path);
}

InvertedIndex InvertedIndex::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open index file: " + path);
    InvertedIndex index;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        chomp_cr(line);
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        std::string key, id_str, lemma_str;
        if (!std::getline(row, key, '\t') || !std::getline(row, id_str, '\t') ||
            !std::getline(row, lemma_str))
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed index row");
        std::vector<std::string> lemmas;
        std::istringstream ls(lemma_str);
        std::string lemma;
        while (ls >> lemma) lemmas.push_back(lemma);
        if (lemmas.empty() || lemmas.front() != key)
            throw DataError(path + ":" + std::to_string(lineno) + ": key does not match first lemma");
        index.insert(static_cast<EntityId>(std::stol(id_str)), std::move(lemmas));
    }
    index.finalize();
    return index;
}

InvertedIndex build_index(const KnowledgeGraph& kg, const Lemmatizer& lemmatizer,
                          IndexBuildReport* report) {
    InvertedIndex index;
    IndexBuildReport rep;
    for (EntityId e = 0; e < static_cast<EntityId>(kg.entity_count()); ++e) {
        auto tokens = tokenize(kg.entity_text(e));
        if (tokens.empty()) {
            ++rep.skipped_empty;
            continue;
        }
        std::vector<std::string> lemmas;
        lemmas.reserve(tokens.size());
        for (const auto& t : tokens) lemmas.push_back(lemmatizer.lemmatize(t));
        index.insert(e, std::move(lemmas));
        ++rep.indexed;
    }
    index.finalize();
    if (report) *report = rep;
    return index;
}

std::vector<MentionSpan> link(const InvertedIndex& index, const std::vector<std::string>& tokens,
                              const Lemmatizer& lemmatizer) {
    std::vector<std::string> lemmas;
    lemmas.reserve(tokens.size());
    for (const auto& t : tokens) lemmas.push_back(lemmatizer.lemmatize(t));

    std::vector<MentionSpan> spans;
    const size_t n = lemmas.size();
    size_t i = 0;
    while (i < n) {
        const auto* bucket = index.bucket(lemmas[i]);
        if (bucket) {
            const InvertedIndex::Entry* best = nullptr;
            for (const auto& entry : *bucket) {
                const size_t len = entry.lemmas.size();
                if (i + len > n) continue;
                if (std::equal(entry.lemmas.begin(), entry.lemmas.end(), lemmas.begin() + i)) {
                    best = &entry; // entries are ordered longest-first, id ascending
                    break;
                }
            }
            if (best) {
                spans.push_back({best->entity, static_cast<int32_t>(i),
                                 static_cast<int32_t>(i + best->lemmas.size())});
                i += best->lemmas.size();
                continue;
            }
        }
        ++i;
    }
    return spans;
}

} // namespace kgmask
