#include "kgmask/text.hpp"

#include <cctype>

namespace kgmask {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

} // namespace

std::string to_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        while (i < n && is_space(static_cast<unsigned char>(text[i]))) ++i;
        size_t j = i;
        while (j < n && !is_space(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) {
            size_t a = i, b = j;
            while (a < b && is_punct(static_cast<unsigned char>(text[a]))) ++a;
            while (b > a && is_punct(static_cast<unsigned char>(text[b - 1]))) --b;
            if (b > a) tokens.push_back(to_lower(text.substr(a, b - a)));
        }
        i = j;
    }
    return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

void chomp_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

} // namespace kgmask
