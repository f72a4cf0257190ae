#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kgmask {

// Word-level tokenizer used everywhere in the pipeline: whitespace split,
// ASCII lowercasing, punctuation stripped at token edges (inner punctuation
// like the apostrophe in "don't" survives). Bytes >= 0x80 pass through.
std::vector<std::string> tokenize(std::string_view text);

std::string to_lower(std::string_view s);

std::string join_tokens(const std::vector<std::string>& tokens);

// Strips a trailing '\r' (CRLF normalization for line-based readers).
void chomp_cr(std::string& line);

} // namespace kgmask
