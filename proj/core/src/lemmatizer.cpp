#include "kgmask/lemmatizer.hpp"

#include "kgmask/errors.hpp"
#include "kgmask/text.hpp"

#include <fstream>

namespace kgmask {

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_consonant(char c) { return c >= 'a' && c <= 'z' && c != 'a' && c != 'e' && c != 'i' && c != 'o' && c != 'u'; }

// "runn" -> "run", "stopp" -> "stop"; leaves "walk" alone.
void repair_doubled(std::string& s) {
    size_t n = s.size();
    if (n >= 2 && s[n - 1] == s[n - 2] && is_consonant(s[n - 1])) s.pop_back();
}

// One rule-table pass; returns true if anything changed.
bool apply_rules(std::string& s) {
    const size_t n = s.size();
    if (n >= 5 && ends_with(s, "ies")) {
        s.erase(n - 3);
        s.push_back('y');
        return true;
    }
    if (n >= 4 && ends_with(s, "es")) {
        std::string stem = s.substr(0, n - 2);
        if (ends_with(stem, "s") || ends_with(stem, "x") || ends_with(stem, "z") ||
            ends_with(stem, "ch") || ends_with(stem, "sh")) {
            s = std::move(stem);
            return true;
        }
    }
    if (n >= 4 && ends_with(s, "s") && !ends_with(s, "ss")) {
        s.pop_back();
        return true;
    }
    if (n >= 6 && ends_with(s, "ing")) {
        s.erase(n - 3);
        repair_doubled(s);
        return true;
    }
    if (n >= 5 && ends_with(s, "ed")) {
        s.erase(n - 2);
        repair_doubled(s);
        return true;
    }
    return false;
}

} // namespace

Lemmatizer::Lemmatizer() {
    static const char* kIrregular[][2] = {
        {"children", "child"}, {"men", "man"},     {"women", "woman"}, {"people", "person"},
        {"feet", "foot"},      {"teeth", "tooth"}, {"mice", "mouse"},  {"geese", "goose"},
        {"oxen", "ox"},        {"lives", "life"},  {"knives", "knife"},
    };
    for (const auto& pair : kIrregular) exceptions_.emplace(pair[0], pair[1]);
}

void Lemmatizer::add_exception(const std::string& surface, const std::string& lemma) {
    exceptions_[to_lower(surface)] = to_lower(lemma);
}

void Lemmatizer::load_exceptions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open lemma exception file: " + path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        chomp_cr(line);
        if (line.empty() || line[0] == '#') continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected surface<TAB>lemma");
        add_exception(line.substr(0, tab), line.substr(tab + 1));
    }
}

std::string Lemmatizer::lemmatize(std::string_view token) const {
    std::string s = to_lower(token);
    for (int iter = 0; iter < 8; ++iter) {
        auto it = exceptions_.find(s);
        if (it != exceptions_.end()) {
            if (it->second == s) return s;
            s = it->second;
            continue;
        }
        if (!apply_rules(s)) return s;
    }
    return s;
}

} // namespace kgmask
