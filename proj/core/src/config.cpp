#include "kgmask/config.hpp"

#include "kgmask/errors.hpp"
#include "kgmask/text.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace kgmask {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

} // namespace

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
}

KvConfig KvConfig::parse_string(const std::string& text, const std::string& origin) {
    KvConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        chomp_cr(line);
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw DataError(origin + ":" + std::to_string(lineno) + ": expected key=value, got '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw DataError(origin + ":" + std::to_string(lineno) + ": empty key");
        cfg.values_[key] = value;
    }
    return cfg;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': not a number: '" + it->second + "'");
    }
}

long KvConfig::get_int(const std::string& key, long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t pos = 0;
        long v = std::stol(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': not an integer: '" + it->second + "'");
    }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw DataError("config key '" + key + "': not a boolean: '" + v + "'");
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

void KvConfig::require_known(const std::set<std::string>& known) const {
    for (const auto& [k, _] : values_)
        if (!known.count(k)) throw UsageError("unknown config key: '" + k + "' (from " + origin_ + ")");
}

std::string to_string(MaskScheme s) {
    switch (s) {
        case MaskScheme::kg_guided: return "kg";
        case MaskScheme::whole_word: return "whole_word";
        case MaskScheme::random_entity: return "random_entity";
    }
    return "kg";
}

MaskScheme mask_scheme_from_string(const std::string& s) {
    if (s == "kg") return MaskScheme::kg_guided;
    if (s == "whole_word") return MaskScheme::whole_word;
    if (s == "random_entity") return MaskScheme::random_entity;
    throw UsageError("unknown masking scheme: '" + s + "' (expected kg, whole_word or random_entity)");
}

void MaskingConfig::validate() const {
    auto in01 = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!(budget_fraction > 0.0 && budget_fraction < 1.0))
        throw UsageError("budget_fraction must be in (0,1)");
    if (!in01(entity_branch_prob)) throw UsageError("entity_branch_prob must be in [0,1]");
    if (!(geometric_p > 0.0 && geometric_p < 1.0)) throw UsageError("geometric_p must be in (0,1)");
    if (max_span_len < 1) throw UsageError("max_span_len must be >= 1");
    if (r_hop < 1) throw UsageError("r_hop must be >= 1");
    if (!(r_min <= r_max)) throw UsageError("r_min must be <= r_max");
    if (!in01(df_quantile)) throw UsageError("df_quantile must be in [0,1]");
    if (!in01(corrupt_mask) || !in01(corrupt_random) || !in01(corrupt_keep))
        throw UsageError("corruption probabilities must be in [0,1]");
    const double sum = corrupt_mask + corrupt_random + corrupt_keep;
    if (sum < 0.999 || sum > 1.001) throw UsageError("corruption probabilities must sum to 1");
}

const std::set<std::string>& PipelineConfig::known_keys() {
    static const std::set<std::string> keys = {
        "budget_fraction", "entity_branch_prob", "geometric_p",  "max_span_len",
        "r_hop",           "r_min",              "r_max",        "df_quantile",
        "corrupt_mask",    "corrupt_random",     "corrupt_keep", "reach_inclusive",
        "scheme",          "negatives_k",        "exclude_cooccurring",
    };
    return keys;
}

void PipelineConfig::apply(const KvConfig& cfg) {
    cfg.require_known(known_keys());
    masking.budget_fraction = cfg.get_double("budget_fraction", masking.budget_fraction);
    masking.entity_branch_prob = cfg.get_double("entity_branch_prob", masking.entity_branch_prob);
    masking.geometric_p = cfg.get_double("geometric_p", masking.geometric_p);
    masking.max_span_len = static_cast<int>(cfg.get_int("max_span_len", masking.max_span_len));
    masking.r_hop = static_cast<int>(cfg.get_int("r_hop", masking.r_hop));
    masking.r_min = cfg.get_double("r_min", masking.r_min);
    masking.r_max = cfg.get_double("r_max", masking.r_max);
    masking.df_quantile = cfg.get_double("df_quantile", masking.df_quantile);
    masking.corrupt_mask = cfg.get_double("corrupt_mask", masking.corrupt_mask);
    masking.corrupt_random = cfg.get_double("corrupt_random", masking.corrupt_random);
    masking.corrupt_keep = cfg.get_double("corrupt_keep", masking.corrupt_keep);
    masking.reach_inclusive = cfg.get_bool("reach_inclusive", masking.reach_inclusive);
    masking.scheme = mask_scheme_from_string(cfg.get_string("scheme", to_string(masking.scheme)));
    negatives_k = static_cast<int>(cfg.get_int("negatives_k", negatives_k));
    exclude_cooccurring = cfg.get_bool("exclude_cooccurring", exclude_cooccurring);
    if (negatives_k < 1) throw UsageError("negatives_k must be >= 1");
    masking.validate();
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string PipelineConfig::echo() const {
    std::string s;
    auto kv = [&s](const std::string& k, const std::string& v) {
        if (!s.empty()) s += ' ';
        s += k;
        s += '=';
        s += v;
    };
    kv("budget_fraction", format_double(masking.budget_fraction));
    kv("entity_branch_prob", format_double(masking.entity_branch_prob));
    kv("geometric_p", format_double(masking.geometric_p));
    kv("max_span_len", std::to_string(masking.max_span_len));
    kv("r_hop", std::to_string(masking.r_hop));
    kv("r_min", format_double(masking.r_min));
    kv("r_max", format_double(masking.r_max));
    kv("df_quantile", format_double(masking.df_quantile));
    kv("corrupt_mask", format_double(masking.corrupt_mask));
    kv("corrupt_random", format_double(masking.corrupt_random));
    kv("corrupt_keep", format_double(masking.corrupt_keep));
    kv("reach_inclusive", masking.reach_inclusive ? "true" : "false");
    kv("scheme", to_string(masking.scheme));
    kv("negatives_k", std::to_string(negatives_k));
    kv("exclude_cooccurring", exclude_cooccurring ? "true" : "false");
    return s;
}

} // namespace kgmask
