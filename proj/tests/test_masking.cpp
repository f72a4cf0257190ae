#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kgmask/errors.hpp"
#include "kgmask/masking.hpp"
#include "kgmask/rng.hpp"

#include <cmath>
#include <map>
#include <set>

using namespace kgmask;

namespace {

std::vector<std::string> make_tokens(size_t n) {
    std::vector<std::string> tokens;
    for (size_t i = 0; i < n; ++i) tokens.push_back("w" + std::to_string(i));
    return tokens;
}

void check_plan_invariants(const MaskPlan& plan, size_t n_tokens) {
    std::set<int32_t> seen;
    int32_t total = 0;
    for (const auto& s : plan.spans) {
        CHECK(s.start >= 0);
        CHECK(s.start < s.end);
        CHECK(s.end <= static_cast<int32_t>(n_tokens));
        for (int32_t i = s.start; i < s.end; ++i) {
            CHECK(seen.insert(i).second); // disjoint
        }
        total += s.end - s.start;
        if (s.kind == SpanKind::entity)
            CHECK(s.entity >= 0);
        else
            CHECK(s.entity == -1);
    }
    if (!plan.spans.empty()) {
        CHECK(total >= plan.budget_tokens);
        const auto& last = plan.spans.back();
        CHECK(total - (last.end - last.start) < plan.budget_tokens);
    }
}

} // namespace

TEST_CASE("df table counts documents, not occurrences") {
    // 3 docs; entity 0 in docs 0 and 1; entity 1 twice within doc 0
    const std::vector<std::vector<EntityId>> docs = {{0, 1, 1}, {0}, {2}};
    const auto table = document_frequency(docs, 3, 0.95);
    CHECK(table.count(0) == 2);
    CHECK(table.count(1) == 1);
    CHECK(table.count(2) == 1);
    CHECK(table.total_documents == 3);
}

TEST_CASE("df empty corpus is an error") {
    CHECK_THROWS_AS(document_frequency({}, 3, 0.95), DataError);
}

TEST_CASE("df threshold cuts the top quantile (hand-sorted oracle)") {
    // 100 distinct entities with df = 1..100: at quantile 0.95 exactly the
    // <= 5 highest may satisfy df >= threshold.
    std::vector<uint32_t> dfs;
    for (uint32_t i = 1; i <= 100; ++i) dfs.push_back(i);
    const uint32_t thr = df_threshold(dfs, 0.95);
    CHECK(thr == 96);
    size_t above = 0;
    for (uint32_t d : dfs)
        if (d >= thr) ++above;
    CHECK(above == 5);
}

TEST_CASE("df threshold with uniform counts filters nothing") {
    const std::vector<uint32_t> dfs(50, 7);
    const uint32_t thr = df_threshold(dfs, 0.95);
    CHECK(thr == 8); // count_ge(7) = 50 > 2.5, so the cut lands above the max
}

TEST_CASE("entity_mask_weight follows indicator and clamp") {
    MaskingConfig cfg;
    DocumentFrequencyTable df;
    df.df = {10, 2};
    df.threshold = 5;
    CHECK(entity_mask_weight(0, df, 4, cfg) == 0.0);  // trivial: df 10 >= 5
    CHECK(entity_mask_weight(1, df, 0, cfg) == 1.0);  // clamp floor R_min
    CHECK(entity_mask_weight(1, df, 1, cfg) == 1.0);
    CHECK(entity_mask_weight(1, df, 2, cfg) == 2.0);
    CHECK(entity_mask_weight(1, df, 5, cfg) == 2.0);  // clamp ceiling R_max
}

TEST_CASE("degenerate sequences produce an empty plan") {
    MaskingConfig cfg;
    Rng rng(1);
    CHECK(sample_mask_plan(make_tokens(1), {}, {}, cfg, rng).spans.empty());
    CHECK(sample_mask_plan(make_tokens(0), {}, {}, cfg, rng).spans.empty());
}

TEST_CASE("10-token text with 0.2 budget covers >= 2 tokens, final span crossing") {
    MaskingConfig cfg;
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        const auto plan = sample_mask_plan(make_tokens(10), {}, {}, cfg, rng);
        CHECK(plan.budget_tokens == 2);
        CHECK(plan.covered_tokens() >= 2);
        check_plan_invariants(plan, 10);
    }
}

TEST_CASE("all-zero mention weights fall through to random spans") {
    MaskingConfig cfg;
    const std::vector<MentionSpan> mentions = {{0, 1, 3}, {1, 5, 7}};
    const std::vector<double> weights = {0.0, 0.0};
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const auto plan = sample_mask_plan(make_tokens(12), mentions, weights, cfg, rng);
        for (const auto& s : plan.spans) CHECK(s.kind == SpanKind::random_span);
    }
}

TEST_CASE("entity branch selection follows weights 2:1 (Monte Carlo vs analytic)") {
    // Two mentions, weights 2.0 and 1.0; entity branch forced. The first
    // selection frequency must be 2/3 : 1/3 within +-0.01 at 100k trials.
    MaskingConfig cfg;
    cfg.entity_branch_prob = 1.0;
    const std::vector<MentionSpan> mentions = {{0, 0, 2}, {1, 5, 7}};
    const std::vector<double> weights = {2.0, 1.0};
    const auto tokens = make_tokens(10); // budget 2: the first pick ends the plan
    Rng rng(123);
    size_t first_counts[2] = {0, 0};
    const int trials = 100000;
    for (int t = 0; t < trials; ++t) {
        const auto plan = sample_mask_plan(tokens, mentions, weights, cfg, rng);
        REQUIRE(!plan.spans.empty());
        REQUIRE(plan.spans[0].kind == SpanKind::entity);
        ++first_counts[plan.spans[0].entity];
    }
    const double f0 = static_cast<double>(first_counts[0]) / trials;
    const double f1 = static_cast<double>(first_counts[1]) / trials;
    CHECK(std::abs(f0 - 2.0 / 3.0) < 0.01);
    CHECK(std::abs(f1 - 1.0 / 3.0) < 0.01);
}

TEST_CASE("zero-weight entities never picked by the entity branch but reachable by spans") {
    MaskingConfig cfg;
    const std::vector<MentionSpan> mentions = {{0, 0, 2}, {1, 4, 6}};
    const std::vector<double> weights = {0.0, 2.0}; // entity 0 is df-trivial
    const auto tokens = make_tokens(12);
    Rng rng(77);
    size_t trivial_tokens_in_random_spans = 0;
    for (int t = 0; t < 20000; ++t) {
        const auto plan = sample_mask_plan(tokens, mentions, weights, cfg, rng);
        for (const auto& s : plan.spans) {
            if (s.kind == SpanKind::entity) CHECK(s.entity != 0);
            if (s.kind == SpanKind::random_span) {
                for (int32_t i = s.start; i < s.end; ++i)
                    if (i >= 0 && i < 2) ++trivial_tokens_in_random_spans;
            }
        }
    }
    CHECK(trivial_tokens_in_random_spans > 0);
}

TEST_CASE("plan invariants hold exhaustively across random settings") {
    MaskingConfig cfg;
    Rng rng(2024);
    for (int t = 0; t < 3000; ++t) {
        const size_t n = 2 + rng.uniform_index(60);
        std::vector<MentionSpan> mentions;
        std::vector<double> weights;
        size_t pos = rng.uniform_index(3);
        EntityId id = 0;
        while (pos + 2 <= n && mentions.size() < 6) {
            const size_t len = 1 + rng.uniform_index(2);
            if (pos + len > n) break;
            mentions.push_back({id++, static_cast<int32_t>(pos), static_cast<int32_t>(pos + len)});
            weights.push_back(static_cast<double>(rng.uniform_index(3))); // 0, 1 or 2
            pos += len + 1 + rng.uniform_index(4);
        }
        const auto plan = sample_mask_plan(make_tokens(n), mentions, weights, cfg, rng);
        check_plan_invariants(plan, n);
        CHECK(plan.budget_tokens ==
              static_cast<int32_t>(std::ceil(cfg.budget_fraction * static_cast<double>(n))));
    }
}

TEST_CASE("same seed and inputs give identical plans") {
    MaskingConfig cfg;
    const std::vector<MentionSpan> mentions = {{0, 1, 3}, {1, 6, 8}};
    const std::vector<double> weights = {1.0, 2.0};
    const auto tokens = make_tokens(20);
    Rng rng_a(555), rng_b(555);
    const auto plan_a = sample_mask_plan(tokens, mentions, weights, cfg, rng_a);
    const auto plan_b = sample_mask_plan(tokens, mentions, weights, cfg, rng_b);
    REQUIRE(plan_a.spans.size() == plan_b.spans.size());
    for (size_t i = 0; i < plan_a.spans.size(); ++i) {
        CHECK(plan_a.spans[i].start == plan_b.spans[i].start);
        CHECK(plan_a.spans[i].end == plan_b.spans[i].end);
        CHECK(plan_a.spans[i].kind == plan_b.spans[i].kind);
        CHECK(plan_a.spans[i].entity == plan_b.spans[i].entity);
        CHECK(plan_a.spans[i].corruption == plan_b.spans[i].corruption);
    }
}

TEST_CASE("raw geometric mean is 1/p") {
    Rng rng(31337);
    double sum = 0.0;
    const int draws = 1000000;
    for (int i = 0; i < draws; ++i) sum += static_cast<double>(rng.geometric(0.2));
    const double mean = sum / draws;
    CHECK(std::abs(mean - 5.0) < 0.1);
}

TEST_CASE("apply_corruption masks whole spans") {
    MaskPlan plan;
    plan.budget_tokens = 2;
    plan.spans.push_back({0, 2, SpanKind::random_span, -1, Corruption::mask_token});
    Rng rng(1);
    const auto out = apply_corruption({"a", "b", "c"}, plan, {"x"}, rng);
    CHECK(out == std::vector<std::string>{"[MASK]", "[MASK]", "c"});
}

TEST_CASE("keep mode leaves the sequence unchanged but positions stay masked") {
    MaskPlan plan;
    plan.budget_tokens = 2;
    plan.spans.push_back({1, 3, SpanKind::random_span, -1, Corruption::keep});
    Rng rng(1);
    const auto out = apply_corruption({"a", "b", "c"}, plan, {"x"}, rng);
    CHECK(out == std::vector<std::string>{"a", "b", "c"});
    CHECK(plan.masked_positions() == std::vector<int32_t>{1, 2});
}

TEST_CASE("random mode draws from the vocabulary, never the mask token") {
    MaskPlan plan;
    plan.budget_tokens = 3;
    plan.spans.push_back({0, 3, SpanKind::random_span, -1, Corruption::random_token});
    Rng rng(9);
    const std::vector<std::string> vocab = {"u", "v", "w"};
    for (int t = 0; t < 200; ++t) {
        const auto out = apply_corruption({"a", "b", "c"}, plan, vocab, rng);
        for (const auto& tok : out) {
            CHECK(tok != "[MASK]");
            CHECK((tok == "u" || tok == "v" || tok == "w"));
        }
    }
}

TEST_CASE("corruption mode frequencies are 0.8/0.1/0.1 (Monte Carlo)") {
    MaskingConfig cfg;
    const auto tokens = make_tokens(40);
    Rng rng(4242);
    std::map<Corruption, size_t> counts;
    size_t total = 0;
    while (total < 10000) {
        const auto plan = sample_mask_plan(tokens, {}, {}, cfg, rng);
        for (const auto& s : plan.spans) {
            ++counts[s.corruption];
            ++total;
        }
    }
    const double n = static_cast<double>(total);
    CHECK(std::abs(counts[Corruption::mask_token] / n - 0.8) < 0.01);
    CHECK(std::abs(counts[Corruption::random_token] / n - 0.1) < 0.01);
    CHECK(std::abs(counts[Corruption::keep] / n - 0.1) < 0.01);
}

TEST_CASE("filter_text keeps only texts with a weight above r_min") {
    const MentionSpan m{0, 0, 1};
    CHECK_FALSE(filter_text({}, {}, 1.0));                    // no mentions
    CHECK(filter_text({m}, {2.0}, 1.0));                      // deducible entity
    CHECK_FALSE(filter_text({m, m}, {0.0, 1.0}, 1.0));        // trivial + undeducible
}

TEST_CASE("whole-word scheme masks single free tokens only") {
    MaskingConfig cfg;
    cfg.scheme = MaskScheme::whole_word;
    const std::vector<MentionSpan> mentions = {{0, 0, 3}};
    const std::vector<double> weights = {2.0};
    Rng rng(11);
    for (int t = 0; t < 300; ++t) {
        const auto plan = sample_mask_plan(make_tokens(15), mentions, weights, cfg, rng);
        check_plan_invariants(plan, 15);
        for (const auto& s : plan.spans) {
            CHECK(s.end - s.start == 1);
            CHECK(s.kind == SpanKind::random_span);
        }
    }
}

TEST_CASE("random-entity scheme ignores weights but respects exclusion of trivial zero") {
    MaskingConfig cfg;
    cfg.scheme = MaskScheme::random_entity;
    cfg.entity_branch_prob = 1.0;
    const std::vector<MentionSpan> mentions = {{0, 0, 2}, {1, 5, 7}};
    const std::vector<double> weights = {2.0, 1.0}; // ignored by this scheme
    const auto tokens = make_tokens(10);
    Rng rng(88);
    size_t first_counts[2] = {0, 0};
    const int trials = 100000;
    for (int t = 0; t < trials; ++t) {
        const auto plan = sample_mask_plan(tokens, mentions, weights, cfg, rng);
        REQUIRE(plan.spans[0].kind == SpanKind::entity);
        ++first_counts[plan.spans[0].entity];
    }
    CHECK(std::abs(static_cast<double>(first_counts[0]) / trials - 0.5) < 0.01);
}
