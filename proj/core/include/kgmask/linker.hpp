#pragma once

#include "kgmask/kg.hpp"
#include "kgmask/lemmatizer.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace kgmask {

// A linked entity occurrence: token index range [start, end) in a document.
struct MentionSpan {
    EntityId entity;
    int32_t start;
    int32_t end;

    bool operator==(const MentionSpan&) const = default;
};

struct IndexBuildReport {
    size_t indexed = 0;
    size_t skipped_empty = 0;
};

// Inverted index over entity surface forms, keyed by the lemma of the first
// surface token. Entries under a key are ordered longest-lemma-sequence
// first, ties by ascending entity id, so a left-to-right scan can take the
// first match.
class InvertedIndex {
  public:
    struct Entry {
        EntityId entity;
        std::vector<std::string> lemmas;
    };

    void insert(EntityId entity, std::vector<std::string> lemmas);
    void finalize(); // sorts bucket entries into match order

    const std::vector<Entry>* bucket(const std::string& key) const;
    size_t max_entity_len() const { return max_entity_len_; }
    size_t entry_count() const { return entry_count_; }

    void save(const std::string& path, const std::string& header_echo) const;
    static InvertedIndex load(const std::string& path);

  private:
    std::map<std::string, std::vector<Entry>> buckets_;
    size_t max_entity_len_ = 0;
    size_t entry_count_ = 0;
};

// Indexes every entity whose tokenized surface form is non-empty.
InvertedIndex build_index(const KnowledgeGraph& kg, const Lemmatizer& lemmatizer,
                          IndexBuildReport* report = nullptr);

// Greedy left-to-right longest-match linking over lemmatized tokens.
// Output spans are non-overlapping and sorted by start.
std::vector<MentionSpan> link(const InvertedIndex& index, const std::vector<std::string>& tokens,
                              const Lemmatizer& lemmatizer);

} // namespace kgmask
