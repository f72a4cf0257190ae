#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace kgmask {

// Flat key=value configuration file. '#' starts a comment, blank lines are
// ignored. Consumers validate every key against their known set; an unknown
// key is an error, never a warning.
class KvConfig {
  public:
    static KvConfig parse_file(const std::string& path);
    static KvConfig parse_string(const std::string& text, const std::string& origin = "<string>");

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;

    // Throws UsageError naming the first key outside `known`.
    void require_known(const std::set<std::string>& known) const;

    const std::map<std::string, std::string>& values() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
    std::string origin_ = "<empty>";
};

enum class MaskScheme { kg_guided, whole_word, random_entity };

std::string to_string(MaskScheme s);
MaskScheme mask_scheme_from_string(const std::string& s);

// Masking hyperparameters. Defaults follow the reference configuration:
// 20% budget, 80/20 entity-vs-span branch split, geometric spans with
// p = 0.2 capped at 10 tokens, hop bound 3 with clamp range [1, 2], top-5%
// document-frequency cutoff, and 80/10/10 corruption.
struct MaskingConfig {
    double budget_fraction = 0.20;
    double entity_branch_prob = 0.80;
    double geometric_p = 0.2;
    int max_span_len = 10;
    int r_hop = 3;
    double r_min = 1.0;
    double r_max = 2.0;
    double df_quantile = 0.95;
    double corrupt_mask = 0.8;
    double corrupt_random = 0.1;
    double corrupt_keep = 0.1;
    // Reachability uses strict "< r_hop"; this switch selects the "<=" variant.
    bool reach_inclusive = false;
    MaskScheme scheme = MaskScheme::kg_guided;

    void validate() const; // throws UsageError on out-of-range values
};

// Pipeline-level knobs layered on top of masking.
struct PipelineConfig {
    MaskingConfig masking;
    int negatives_k = 1;
    bool exclude_cooccurring = true;

    static const std::set<std::string>& known_keys();
    void apply(const KvConfig& cfg); // validates keys, then overrides fields
    // Deterministic one-line echo of the effective semantic configuration,
    // embedded in the header of every artifact the pipeline writes.
    std::string echo() const;
};

std::string format_double(double v); // shortest round-trippable-ish "%g"

} // namespace kgmask
