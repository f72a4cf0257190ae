#include "kgmask/pipeline.hpp"

#include "kgmask/errors.hpp"
#include "kgmask/negatives.hpp"
#include "kgmask/rng.hpp"
#include "kgmask/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace kgmask {

namespace {

void json_escape_into(std::string& out, const std::string& s) {
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
}

void append_string_array(std::string& out, const std::vector<std::string>& items) {
    out += '[';
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += '"';
        json_escape_into(out, items[i]);
        out += '"';
    }
    out += ']';
}

} // namespace

void TrainingExample::validate() const {
    if (doc_id.empty()) throw DataError("record: empty doc_id");
    if (tokens.size() != corrupted.size())
        throw DataError("record " + doc_id + ": |tokens| != |corrupted|");
    const int32_t n = static_cast<int32_t>(tokens.size());
    for (size_t i = 0; i < masked_positions.size(); ++i) {
        const int32_t p = masked_positions[i];
        if (p < 0 || p >= n) throw DataError("record " + doc_id + ": masked position out of bounds");
        if (i > 0 && masked_positions[i] <= masked_positions[i - 1])
            throw DataError("record " + doc_id + ": masked positions not strictly sorted");
    }
    for (const auto& span : entity_spans) {
        if (span.start < 0 || span.end > n || span.start >= span.end)
            throw DataError("record " + doc_id + ": entity span out of bounds");
        for (int32_t p = span.start; p < span.end; ++p)
            if (!std::binary_search(masked_positions.begin(), masked_positions.end(), p))
                throw DataError("record " + doc_id + ": entity span position not masked");
        if (span.positive == span.negative)
            throw DataError("record " + doc_id + ": negative equals positive");
    }
    // Distinct spans must not overlap; identical (start, end) replicas are the
    // k > 1 negative encoding and stay legal.
    std::vector<std::pair<int32_t, int32_t>> distinct;
    for (const auto& s : entity_spans) distinct.emplace_back(s.start, s.end);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (size_t i = 1; i < distinct.size(); ++i)
        if (distinct[i].first < distinct[i - 1].second)
            throw DataError("record " + doc_id + ": overlapping entity spans");
}

std::string TrainingExample::to_json_line() const {
    std::string out;
    out += "{\"doc_id\":\"";
    json_escape_into(out, doc_id);
    out += "\",\"tokens\":";
    append_string_array(out, tokens);
    out += ",\"corrupted\":";
    append_string_array(out, corrupted);
    out += ",\"masked_positions\":[";
    for (size_t i = 0; i < masked_positions.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(masked_positions[i]);
    }
    out += "],\"entity_spans\":[";
    for (size_t i = 0; i < entity_spans.size(); ++i) {
        if (i) out += ',';
        const auto& s = entity_spans[i];
        out += '[';
        out += std::to_string(s.start);
        out += ',';
        out += std::to_string(s.end);
        out += ',';
        out += std::to_string(s.positive);
        out += ',';
        out += std::to_string(s.negative);
        out += ']';
    }
    out += "],\"seed\":";
    out += std::to_string(seed);
    out += '}';
    return out;
}

TrainingExample TrainingExample::from_json_line(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("record: invalid JSON: ") + e.what());
    }
    try {
        TrainingExample ex;
        ex.doc_id = j.at("doc_id").get<std::string>();
        ex.tokens = j.at("tokens").get<std::vector<std::string>>();
        ex.corrupted = j.at("corrupted").get<std::vector<std::string>>();
        ex.masked_positions = j.at("masked_positions").get<std::vector<int32_t>>();
        for (const auto& arr : j.at("entity_spans")) {
            if (!arr.is_array() || arr.size() != 4)
                throw DataError("record " + ex.doc_id + ": entity span must have 4 elements");
            ex.entity_spans.push_back({arr[0].get<int32_t>(), arr[1].get<int32_t>(),
                                       arr[2].get<EntityId>(), arr[3].get<EntityId>()});
        }
        ex.seed = j.at("seed").get<uint64_t>();
        return ex;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("record: schema violation: ") + e.what());
    }
}

std::string CorpusReport::to_kv_block() const {
    char frac[32];
    std::snprintf(frac, sizeof(frac), "%.6f", mean_masked_fraction);
    std::string s;
    s += "documents_total=" + std::to_string(documents_total) + "\n";
    s += "documents_kept=" + std::to_string(documents_kept) + "\n";
    s += "documents_filtered=" + std::to_string(documents_filtered) + "\n";
    s += "mentions=" + std::to_string(mentions) + "\n";
    s += "mean_masked_fraction=" + std::string(frac) + "\n";
    s += "entity_branch_spans=" + std::to_string(entity_branch_spans) + "\n";
    s += "span_branch_spans=" + std::to_string(span_branch_spans) + "\n";
    s += "df_threshold=" + std::to_string(df_threshold) + "\n";
    return s;
}

std::vector<Document> ingest_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    std::vector<Document> docs;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        chomp_cr(line);
        if (!line.empty()) {
            Document d;
            d.doc_id = std::to_string(lineno);
            d.tokens = tokenize(line);
            if (!d.tokens.empty()) docs.push_back(std::move(d));
        }
        ++lineno;
    }
    return docs;
}

namespace {

struct DocOutcome {
    bool kept = false;
    std::string line; // serialized record when kept
    uint64_t mentions = 0;
    uint64_t entity_spans = 0;
    uint64_t random_spans = 0;
    double masked_fraction = 0.0;
};

struct PipelineContext {
    const KnowledgeGraph& kg;
    const InvertedIndex& index;
    const Lemmatizer& lemmatizer;
    const PipelineConfig& cfg;
    const DocumentFrequencyTable& df;
    const std::vector<std::string>& random_vocab;
    uint64_t seed;
};

DocOutcome process_document(const Document& doc, const PipelineContext& ctx) {
    DocOutcome out;
    const auto mentions = link(ctx.index, doc.tokens, ctx.lemmatizer);
    out.mentions = mentions.size();

    std::set<EntityId> detected_set;
    for (const auto& m : mentions) detected_set.insert(m.entity);
    const std::vector<EntityId> detected(detected_set.begin(), detected_set.end());

    // One neighborhood size per distinct entity; all its mentions share it.
    std::vector<double> weights(mentions.size(), 0.0);
    {
        std::vector<double> by_entity;
        std::vector<EntityId> ids;
        for (EntityId e : detected) {
            const size_t nbhd =
                ctx.kg.neighborhood(e, detected, ctx.cfg.masking.r_hop, ctx.cfg.masking.reach_inclusive)
                    .size();
            ids.push_back(e);
            by_entity.push_back(entity_mask_weight(e, ctx.df, nbhd, ctx.cfg.masking));
        }
        for (size_t i = 0; i < mentions.size(); ++i) {
            const auto it = std::lower_bound(ids.begin(), ids.end(), mentions[i].entity);
            weights[i] = by_entity[static_cast<size_t>(it - ids.begin())];
        }
    }

    if (!filter_text(mentions, weights, ctx.cfg.masking.r_min)) return out;

    Rng rng(derive_seed(ctx.seed, doc.doc_id));
    const MaskPlan plan = sample_mask_plan(doc.tokens, mentions, weights, ctx.cfg.masking, rng);
    if (plan.spans.empty()) return out;

    TrainingExample ex;
    ex.doc_id = doc.doc_id;
    ex.tokens = doc.tokens;
    ex.corrupted = apply_corruption(doc.tokens, plan, ctx.random_vocab, rng);
    ex.masked_positions = plan.masked_positions();
    ex.seed = derive_seed(ctx.seed, doc.doc_id);

    std::vector<PlanSpan> entity_spans;
    for (const auto& s : plan.spans) {
        if (s.kind == SpanKind::entity)
            entity_spans.push_back(s);
        else
            ++out.random_spans;
    }
    std::sort(entity_spans.begin(), entity_spans.end(),
              [](const PlanSpan& a, const PlanSpan& b) { return a.start < b.start; });
    out.entity_spans = entity_spans.size();

    const std::vector<EntityId> exclude =
        ctx.cfg.exclude_cooccurring ? detected : std::vector<EntityId>{};
    for (const auto& s : entity_spans) {
        const auto negatives = sample_negative(ctx.kg, s.entity, exclude, ctx.cfg.negatives_k, rng);
        for (EntityId neg : negatives)
            ex.entity_spans.push_back({s.start, s.end, s.entity, neg});
    }

    ex.validate();
    out.kept = true;
    out.masked_fraction =
        static_cast<double>(ex.masked_positions.size()) / static_cast<double>(ex.tokens.size());
    out.line = ex.to_json_line();
    return out;
}

} // namespace

CorpusReport run_pipeline(const std::vector<Document>& docs, const KnowledgeGraph& kg,
                          const InvertedIndex& index, const Lemmatizer& lemmatizer,
                          const PipelineConfig& cfg, uint64_t seed, int workers,
                          std::ostream& out) {
    if (docs.empty()) throw DataError("run_pipeline: empty corpus");

    // Pass 1: document frequencies and the replacement vocabulary.
    std::vector<std::vector<EntityId>> doc_entities(docs.size());
    std::set<std::string> vocab_set;
    for (size_t i = 0; i < docs.size(); ++i) {
        for (const auto& m : link(index, docs[i].tokens, lemmatizer))
            doc_entities[i].push_back(m.entity);
        for (const auto& t : docs[i].tokens) vocab_set.insert(t);
    }
    const DocumentFrequencyTable df =
        document_frequency(doc_entities, kg.entity_count(), cfg.masking.df_quantile);
    const std::vector<std::string> random_vocab(vocab_set.begin(), vocab_set.end());

    // Pass 2: per-document processing, parallel with deterministic output order.
    PipelineContext ctx{kg, index, lemmatizer, cfg, df, random_vocab, seed};
    std::vector<DocOutcome> outcomes(docs.size());
    const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(docs.size())));
    if (n_workers == 1) {
        for (size_t i = 0; i < docs.size(); ++i) outcomes[i] = process_document(docs[i], ctx);
    } else {
        std::atomic<size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        std::vector<std::thread> threads;
        for (int w = 0; w < n_workers; ++w) {
            threads.emplace_back([&] {
                while (true) {
                    const size_t i = next.fetch_add(1);
                    if (i >= docs.size()) return;
                    try {
                        outcomes[i] = process_document(docs[i], ctx);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& t : threads) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    CorpusReport report;
    report.documents_total = docs.size();
    report.df_threshold = df.threshold;
    double fraction_sum = 0.0;
    for (const auto& o : outcomes) {
        report.mentions += o.mentions;
        if (o.kept) {
            ++report.documents_kept;
            report.entity_branch_spans += o.entity_spans;
            report.span_branch_spans += o.random_spans;
            fraction_sum += o.masked_fraction;
            out << o.line << '\n';
        } else {
            ++report.documents_filtered;
        }
    }
    if (report.documents_kept > 0)
        report.mean_masked_fraction = fraction_sum / static_cast<double>(report.documents_kept);
    return report;
}

CorpusReport run_pipeline_to_file(const std::vector<Document>& docs, const KnowledgeGraph& kg,
                                  const InvertedIndex& index, const Lemmatizer& lemmatizer,
                                  const PipelineConfig& cfg, uint64_t seed, int workers,
                                  const std::string& out_path) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot write examples file: " + out_path);
    out << "# kgmask-examples v1 | seed=" << seed << " | " << cfg.echo() << "\n";
    CorpusReport report = run_pipeline(docs, kg, index, lemmatizer, cfg, seed, workers, out);
    if (!out) throw DataError("write failed: " + out_path);
    return report;
}

std::vector<TrainingExample> read_examples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open examples file: " + path);
    std::vector<TrainingExample> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        chomp_cr(line);
        if (line.empty() || line[0] == '#') continue;
        try {
            TrainingExample ex = TrainingExample::from_json_line(line);
            ex.validate();
            out.push_back(std::move(ex));
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

CorpusReport corpus_stats(const std::string& path) {
    const auto examples = read_examples(path);
    CorpusReport report;
    report.documents_total = examples.size();
    report.documents_kept = examples.size();
    double fraction_sum = 0.0;
    for (const auto& ex : examples) {
        // Distinct entity spans (k > 1 negatives replicate the same span).
        std::set<std::pair<int32_t, int32_t>> distinct;
        std::vector<bool> in_entity_span(ex.tokens.size(), false);
        for (const auto& s : ex.entity_spans) {
            distinct.insert({s.start, s.end});
            for (int32_t p = s.start; p < s.end; ++p) in_entity_span[static_cast<size_t>(p)] = true;
        }
        report.entity_branch_spans += distinct.size();
        report.mentions += distinct.size();
        // Maximal masked runs outside entity spans approximate random spans.
        bool in_run = false;
        int32_t prev = -2;
        for (int32_t p : ex.masked_positions) {
            if (in_entity_span[static_cast<size_t>(p)]) {
                in_run = false;
            } else {
                if (!in_run || p != prev + 1) ++report.span_branch_spans;
                in_run = true;
            }
            prev = p;
        }
        fraction_sum +=
            static_cast<double>(ex.masked_positions.size()) / static_cast<double>(ex.tokens.size());
    }
    if (!examples.empty())
        report.mean_masked_fraction = fraction_sum / static_cast<double>(examples.size());
    return report;
}

} // namespace kgmask
