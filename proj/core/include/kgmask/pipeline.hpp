#pragma once

#include "kgmask/config.hpp"
#include "kgmask/kg.hpp"
#include "kgmask/linker.hpp"
#include "kgmask/masking.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace kgmask {

struct Document {
    std::string doc_id; // zero-based line number in the source file
    std::vector<std::string> tokens;
};

// One serialized training record.
struct TrainingExample {
    std::string doc_id;
    std::vector<std::string> tokens;    // original
    std::vector<std::string> corrupted; // same length
    std::vector<int32_t> masked_positions;
    struct EntitySpan {
        int32_t start;
        int32_t end;
        EntityId positive;
        EntityId negative;
    };
    std::vector<EntitySpan> entity_spans;
    uint64_t seed = 0; // per-document seed actually used

    void validate() const; // throws DataError on any violated invariant
    std::string to_json_line() const;
    static TrainingExample from_json_line(const std::string& line);
};

struct CorpusReport {
    uint64_t documents_total = 0;
    uint64_t documents_kept = 0;
    uint64_t documents_filtered = 0;
    uint64_t mentions = 0;
    double mean_masked_fraction = 0.0;
    uint64_t entity_branch_spans = 0;
    uint64_t span_branch_spans = 0;
    uint32_t df_threshold = 0;

    std::string to_kv_block() const;
};

// One document per non-empty line; doc_id is the zero-based line number in
// the file. CRLF input yields the same documents as LF.
std::vector<Document> ingest_corpus(const std::string& path);

// Two-pass corpus processing. Pass 1 computes document frequencies and the
// replacement vocabulary over the full corpus; pass 2 links, weights,
// filters, plans masks, samples negatives and emits one record per kept
// document, in input order regardless of `workers`.
CorpusReport run_pipeline(const std::vector<Document>& docs, const KnowledgeGraph& kg,
                          const InvertedIndex& index, const Lemmatizer& lemmatizer,
                          const PipelineConfig& cfg, uint64_t seed, int workers,
                          std::ostream& out);

// Convenience wrapper writing to a file with the standard header line.
CorpusReport run_pipeline_to_file(const std::vector<Document>& docs, const KnowledgeGraph& kg,
                                  const InvertedIndex& index, const Lemmatizer& lemmatizer,
                                  const PipelineConfig& cfg, uint64_t seed, int workers,
                                  const std::string& out_path);

// Reads an examples file (skipping '#' header lines), validating every record.
std::vector<TrainingExample> read_examples(const std::string& path);

// Aggregates invariant-checked statistics from an examples file. Branch
// counts are reconstructed from the records: entity spans are explicit,
// random-span counts are approximated by maximal masked runs not covered by
// an entity span. Filtered documents are not recoverable from the file, so
// total == kept and filtered == 0 here.
CorpusReport corpus_stats(const std::string& path);

} // namespace kgmask
