// kgmask: knowledge-graph-guided masking pipeline, trainer and evaluator.
//
// Subcommands: build-index, link, mask, emit, train, eval-lp, eval-tc, stats.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.

#include "kgmask/errors.hpp"
#include "kgmask/kbc.hpp"
#include "kgmask/kg.hpp"
#include "kgmask/lemmatizer.hpp"
#include "kgmask/linker.hpp"
#include "kgmask/masking.hpp"
#include "kgmask/pipeline.hpp"
#include "kgmask/rng.hpp"
#include "kgmask/text.hpp"
#include "kgmask/trainer.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>

namespace {

using namespace kgmask;

// defaults <- config file <- repeated --set key=value flags
KvConfig layered_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    KvConfig cfg;
    if (!config_path.empty()) cfg = KvConfig::parse_file(config_path);
    for (const auto& kv : overrides) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

Lemmatizer make_lemmatizer(const std::string& exceptions_path) {
    Lemmatizer lem;
    if (!exceptions_path.empty()) lem.load_exceptions(exceptions_path);
    return lem;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
    if (!out) throw DataError("write failed: " + path);
}

struct CommonArgs {
    std::string kg_path;
    std::string format = "tsv";
    std::string config_path;
    std::vector<std::string> overrides;
    std::string lemma_exceptions;
};

int run(int argc, char** argv) {
    CLI::App app{"knowledge-graph-guided masking pipeline"};
    app.require_subcommand(1);

    // ---- build-index ----
    auto* cmd_index = app.add_subcommand("build-index", "build the entity inverted index");
    CommonArgs ia;
    std::string index_out;
    cmd_index->add_option("--kg", ia.kg_path, "triple file")->required();
    cmd_index->add_option("--format", ia.format, "tsv or csv");
    cmd_index->add_option("--out", index_out, "index artifact path")->required();
    cmd_index->add_option("--lemma-exceptions", ia.lemma_exceptions, "surface<TAB>lemma file");

    // ---- link ----
    auto* cmd_link = app.add_subcommand("link", "detect entity mentions");
    CommonArgs la;
    std::string link_text, link_corpus, link_index;
    cmd_link->add_option("--kg", la.kg_path, "triple file");
    cmd_link->add_option("--format", la.format, "tsv or csv");
    cmd_link->add_option("--index", link_index, "prebuilt index artifact");
    cmd_link->add_option("--text", link_text, "single text to link");
    cmd_link->add_option("--corpus", link_corpus, "one-sentence-per-line corpus");
    cmd_link->add_option("--lemma-exceptions", la.lemma_exceptions, "surface<TAB>lemma file");

    // ---- mask ----
    auto* cmd_mask = app.add_subcommand("mask", "print mask plans for a corpus");
    CommonArgs ma;
    std::string mask_corpus;
    uint64_t mask_seed = 42;
    cmd_mask->add_option("--kg", ma.kg_path, "triple file")->required();
    cmd_mask->add_option("--format", ma.format, "tsv or csv");
    cmd_mask->add_option("--corpus", mask_corpus, "corpus file")->required();
    cmd_mask->add_option("--config", ma.config_path, "key=value config file");
    cmd_mask->add_option("--set", ma.overrides, "config override key=value");
    cmd_mask->add_option("--seed", mask_seed, "global seed");
    cmd_mask->add_option("--lemma-exceptions", ma.lemma_exceptions, "surface<TAB>lemma file");

    // ---- emit ----
    auto* cmd_emit = app.add_subcommand("emit", "run the two-pass pipeline and emit records");
    CommonArgs ea;
    std::string emit_corpus, emit_out, emit_report;
    uint64_t emit_seed = 42;
    int emit_workers = 1;
    cmd_emit->add_option("--kg", ea.kg_path, "triple file")->required();
    cmd_emit->add_option("--format", ea.format, "tsv or csv");
    cmd_emit->add_option("--corpus", emit_corpus, "corpus file")->required();
    cmd_emit->add_option("--out", emit_out, "examples output path")->required();
    cmd_emit->add_option("--report", emit_report, "report output path");
    cmd_emit->add_option("--config", ea.config_path, "key=value config file");
    cmd_emit->add_option("--set", ea.overrides, "config override key=value");
    cmd_emit->add_option("--seed", emit_seed, "global seed");
    cmd_emit->add_option("--workers", emit_workers, "worker threads");
    cmd_emit->add_option("--lemma-exceptions", ea.lemma_exceptions, "surface<TAB>lemma file");

    // ---- train ----
    auto* cmd_train = app.add_subcommand("train", "train the encoder on emitted examples");
    CommonArgs ta;
    std::string train_examples, train_out, train_loss_log, train_eval, train_eval_log;
    cmd_train->add_option("--examples", train_examples, "examples file")->required();
    cmd_train->add_option("--kg", ta.kg_path, "triple file")->required();
    cmd_train->add_option("--format", ta.format, "tsv or csv");
    cmd_train->add_option("--out", train_out, "checkpoint output path")->required();
    cmd_train->add_option("--loss-log", train_loss_log, "per-step loss CSV");
    cmd_train->add_option("--eval", train_eval, "held-out examples file");
    cmd_train->add_option("--eval-log", train_eval_log, "held-out metrics CSV");
    cmd_train->add_option("--config", ta.config_path, "key=value config file");
    cmd_train->add_option("--set", ta.overrides, "config override key=value");

    // ---- eval-lp ----
    auto* cmd_lp = app.add_subcommand("eval-lp", "filtered-setting link prediction");
    std::string lp_checkpoint, lp_train, lp_dev, lp_test, lp_format = "tsv";
    std::string lp_basis = "probability", lp_corrupt = "both", lp_out;
    cmd_lp->add_option("--checkpoint", lp_checkpoint, "trained checkpoint")->required();
    cmd_lp->add_option("--train", lp_train, "training triples")->required();
    cmd_lp->add_option("--dev", lp_dev, "dev triples")->required();
    cmd_lp->add_option("--test", lp_test, "test triples")->required();
    cmd_lp->add_option("--format", lp_format, "tsv or csv");
    cmd_lp->add_option("--basis", lp_basis, "probability or logit");
    cmd_lp->add_option("--corrupt", lp_corrupt, "head, tail or both");
    cmd_lp->add_option("--out", lp_out, "metrics report path");

    // ---- eval-tc ----
    auto* cmd_tc = app.add_subcommand("eval-tc", "triple classification");
    std::string tc_checkpoint, tc_dev, tc_test, tc_format = "tsv";
    std::string tc_basis = "probability", tc_out;
    cmd_tc->add_option("--checkpoint", tc_checkpoint, "trained checkpoint")->required();
    cmd_tc->add_option("--dev", tc_dev, "labeled dev triples")->required();
    cmd_tc->add_option("--test", tc_test, "labeled test triples")->required();
    cmd_tc->add_option("--format", tc_format, "tsv or csv");
    cmd_tc->add_option("--basis", tc_basis, "probability or logit");
    cmd_tc->add_option("--out", tc_out, "report path");

    // ---- stats ----
    auto* cmd_stats = app.add_subcommand("stats", "validate and summarize an examples file");
    std::string stats_examples, stats_out;
    cmd_stats->add_option("--examples", stats_examples, "examples file")->required();
    cmd_stats->add_option("--out", stats_out, "report path");

    CLI11_PARSE(app, argc, argv);

    if (cmd_index->parsed()) {
        const auto lem = make_lemmatizer(ia.lemma_exceptions);
        KgLoadReport load_rep;
        const auto kg = load_triples(ia.kg_path, triple_format_from_string(ia.format), &load_rep);
        IndexBuildReport rep;
        const auto index = build_index(kg, lem, &rep);
        index.save(index_out, "entities=" + std::to_string(kg.entity_count()));
        std::cout << "entities=" << kg.entity_count() << "\nrelations=" << kg.relation_count()
                  << "\ntriples=" << kg.triple_count() << "\nduplicates=" << load_rep.duplicates
                  << "\nself_loops=" << load_rep.self_loops << "\nindexed=" << rep.indexed
                  << "\nskipped_empty_surface=" << rep.skipped_empty << "\n";
        return 0;
    }

    if (cmd_link->parsed()) {
        const auto lem = make_lemmatizer(la.lemma_exceptions);
        InvertedIndex index;
        KnowledgeGraph kg;
        bool have_kg = false;
        if (!link_index.empty()) {
            index = InvertedIndex::load(link_index);
        } else if (!la.kg_path.empty()) {
            kg = load_triples(la.kg_path, triple_format_from_string(la.format));
            index = build_index(kg, lem);
            have_kg = true;
        } else {
            throw UsageError("link: need --kg or --index");
        }
        std::vector<Document> docs;
        if (!link_text.empty()) {
            docs.push_back({"0", tokenize(link_text)});
        } else if (!link_corpus.empty()) {
            docs = ingest_corpus(link_corpus);
        } else {
            throw UsageError("link: need --text or --corpus");
        }
        for (const auto& doc : docs) {
            for (const auto& span : link(index, doc.tokens, lem)) {
                std::cout << doc.doc_id << '\t' << span.start << '\t' << span.end << '\t'
                          << span.entity;
                if (have_kg) std::cout << '\t' << kg.entity_text(span.entity);
                std::cout << '\n';
            }
        }
        return 0;
    }

    if (cmd_mask->parsed() || cmd_emit->parsed()) {
        const bool emitting = cmd_emit->parsed();
        CommonArgs& args = emitting ? ea : ma;
        PipelineConfig cfg;
        cfg.apply(layered_config(args.config_path, args.overrides));
        const auto lem = make_lemmatizer(args.lemma_exceptions);
        const auto kg = load_triples(args.kg_path, triple_format_from_string(args.format));
        const auto index = build_index(kg, lem);
        const auto docs = ingest_corpus(emitting ? emit_corpus : mask_corpus);

        if (!emitting) {
            // Plans only: run the pipeline machinery doc by doc and print spans.
            std::vector<std::vector<EntityId>> doc_entities(docs.size());
            for (size_t i = 0; i < docs.size(); ++i)
                for (const auto& m : link(index, docs[i].tokens, lem))
                    doc_entities[i].push_back(m.entity);
            const auto df = document_frequency(doc_entities, kg.entity_count(),
                                               cfg.masking.df_quantile);
            std::cout << "# kgmask-plans v1 | seed=" << mask_seed << " | " << cfg.echo() << "\n";
            for (const auto& doc : docs) {
                const auto mentions = link(index, doc.tokens, lem);
                std::set<EntityId> det(doc_entities.begin()->begin(), doc_entities.begin()->end());
                std::set<EntityId> detected_set;
                for (const auto& m : mentions) detected_set.insert(m.entity);
                std::vector<EntityId> detected(detected_set.begin(), detected_set.end());
                std::vector<double> weights;
                for (const auto& m : mentions) {
                    const size_t nbhd = kg.neighborhood(m.entity, detected, cfg.masking.r_hop,
                                                        cfg.masking.reach_inclusive)
                                            .size();
                    weights.push_back(entity_mask_weight(m.entity, df, nbhd, cfg.masking));
                }
                if (!filter_text(mentions, weights, cfg.masking.r_min)) {
                    std::cout << "doc " << doc.doc_id << " filtered\n";
                    continue;
                }
                Rng rng(derive_seed(mask_seed, doc.doc_id));
                const auto plan = sample_mask_plan(doc.tokens, mentions, weights, cfg.masking, rng);
                std::cout << "doc " << doc.doc_id << " budget " << plan.budget_tokens << "\n";
                for (const auto& s : plan.spans) {
                    std::cout << "  span " << s.start << ' ' << s.end << ' '
                              << (s.kind == SpanKind::entity ? "entity" : "random") << ' ';
                    if (s.kind == SpanKind::entity)
                        std::cout << s.entity;
                    else
                        std::cout << '-';
                    const char* mode = s.corruption == Corruption::mask_token ? "mask"
                                       : s.corruption == Corruption::random_token ? "random"
                                                                                  : "keep";
                    std::cout << ' ' << mode << "\n";
                }
            }
            return 0;
        }

        const auto report =
            run_pipeline_to_file(docs, kg, index, lem, cfg, emit_seed, emit_workers, emit_out);
        std::string report_text = "# kgmask-report v1 | seed=" + std::to_string(emit_seed) +
                                  " | " + cfg.echo() + "\n" + report.to_kv_block();
        if (!emit_report.empty())
            write_text_file(emit_report, report_text);
        else
            std::cout << report_text;
        return 0;
    }

    if (cmd_train->parsed()) {
        TrainConfig cfg;
        cfg.apply(layered_config(ta.config_path, ta.overrides));
        const auto kg = load_triples(ta.kg_path, triple_format_from_string(ta.format));
        const auto examples = read_examples(train_examples);
        std::vector<TrainingExample> eval_set;
        if (!train_eval.empty()) eval_set = read_examples(train_eval);
        const auto result =
            train(cfg, examples, kg, train_eval.empty() ? nullptr : &eval_set);
        save_checkpoint(result.params, train_out, cfg.echo());
        if (!train_loss_log.empty()) write_loss_log_csv(train_loss_log, result.log, cfg.echo());
        if (!train_eval_log.empty()) write_eval_log_csv(train_eval_log, result.eval_log, cfg.echo());
        if (result.aborted) {
            std::cerr << "training aborted: " << result.abort_reason
                      << " (last good checkpoint written)\n";
            return 3;
        }
        if (!result.log.empty()) {
            const auto& last = result.log.back();
            std::cout << "steps=" << last.step << " L_M=" << last.l_mlm << " L_R=" << last.l_rank
                      << " L=" << last.l_total << "\n";
        } else {
            std::cout << "steps=0 (checkpoint equals initialization)\n";
        }
        return 0;
    }

    if (cmd_lp->parsed()) {
        const auto params = load_checkpoint(lp_checkpoint);
        const auto fmt = triple_format_from_string(lp_format);
        KnowledgeGraph kg;
        const auto train_triples = load_labeled_triples(lp_train, fmt, kg);
        const auto dev_triples = load_labeled_triples(lp_dev, fmt, kg);
        const auto test_triples = load_labeled_triples(lp_test, fmt, kg);
        std::set<Triple> known_true;
        std::vector<Triple> test;
        for (const auto* split : {&train_triples, &dev_triples, &test_triples})
            for (const auto& lt : *split)
                if (lt.label == 1) known_true.insert(lt.triple);
        for (const auto& lt : test_triples)
            if (lt.label == 1) test.push_back(lt.triple);
        const auto metrics =
            filtered_link_prediction(params, kg, test, known_true,
                                     corrupt_side_from_string(lp_corrupt),
                                     rank_basis_from_string(lp_basis));
        std::string text = "# kgmask-lp v1 | basis=" + lp_basis + " corrupt=" + lp_corrupt + "\n" +
                           metrics.to_kv_block();
        if (!lp_out.empty())
            write_text_file(lp_out, text);
        else
            std::cout << text;
        return 0;
    }

    if (cmd_tc->parsed()) {
        const auto params = load_checkpoint(tc_checkpoint);
        const auto fmt = triple_format_from_string(tc_format);
        KnowledgeGraph kg;
        const auto dev = load_labeled_triples(tc_dev, fmt, kg);
        const auto test = load_labeled_triples(tc_test, fmt, kg);
        const auto result =
            triple_classification(params, kg, dev, test, rank_basis_from_string(tc_basis));
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "# kgmask-tc v1 | basis=%s\nthreshold=%.9g\ndev_accuracy=%.6f\ntest_accuracy=%.6f\n",
                      tc_basis.c_str(), result.threshold, result.dev_accuracy, result.test_accuracy);
        if (!tc_out.empty())
            write_text_file(tc_out, buf);
        else
            std::cout << buf;
        return 0;
    }

    if (cmd_stats->parsed()) {
        const auto report = corpus_stats(stats_examples);
        std::string text = "# kgmask-stats v1\n" + report.to_kv_block();
        if (!stats_out.empty())
            write_text_file(stats_out, text);
        else
            std::cout << text;
        return 0;
    }

    throw UsageError("no subcommand given");
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const kgmask::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const kgmask::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
