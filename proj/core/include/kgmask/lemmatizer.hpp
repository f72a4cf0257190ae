#pragma once

#include <map>
#include <string>
#include <string_view>

namespace kgmask {

// Rule-table lemmatizer for lemma-level fuzzy matching. Exceptions are
// checked first, then suffix rules in order: -ies -> -y, -es removal when
// the stem ends in s/x/z/ch/sh, -s removal, -ing and -ed removal with
// doubled-consonant repair. Rules are applied to a fixpoint, which makes
// lemmatize idempotent by construction.
class Lemmatizer {
  public:
    Lemmatizer(); // seeds the built-in irregular-form table

    // Extends the exception table from a UTF-8 file of "surface<TAB>lemma" lines.
    void load_exceptions(const std::string& path);
    void add_exception(const std::string& surface, const std::string& lemma);

    std::string lemmatize(std::string_view token) const;

  private:
    std::map<std::string, std::string> exceptions_;
};

} // namespace kgmask
