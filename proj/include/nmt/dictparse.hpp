#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nmt::dictparse {

struct DictEntry {
    std::string headword;
    std::vector<std::string> senses;  // target-language definitions, file order
};

/// Bilingual dictionary: headword -> ordered sense list. Lookup of a missing
/// headword yields an empty list, never an error. Matching is exact and
/// case-sensitive (German nouns are capitalized; folding would merge
/// unrelated entries).
class Dictionary {
public:
    const std::vector<std::string>& lookup(const std::string& word) const;
    bool contains(const std::string& word) const { return entries_.count(word) != 0; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    // Appends senses for a headword, dropping exact-duplicate definition
    // strings. First-occurrence order is preserved.
    void add(const std::string& headword, const std::vector<std::string>& senses);

    const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }

    void save_tsv(const std::string& path) const;
    static Dictionary load_tsv(const std::string& path);

private:
    std::map<std::string, std::vector<std::string>> entries_;
};

struct ParseStats {
    std::uint64_t lines_read = 0;
    std::uint64_t lines_skipped = 0;  // malformed or comment-only content
    std::uint64_t entries_kept = 0;   // distinct headwords in the result
};

/// Removes balanced {...}, [...], (...) groups (non-nested; an unbalanced
/// opening bracket drops the remainder of the fragment), collapses whitespace
/// runs and trims. Total and idempotent.
std::string strip_metadata(std::string_view fragment);

/// Applies the headword filters to an already metadata-stripped headword.
/// Returns the kept form (a leading "sich " is removed, the rest kept), or
/// nullopt when the headword is dropped. Drop rules: any non-letter other
/// than hyphen or internal space; the object abbreviations jdm./jdn./jds./etw.;
/// preposition + abbreviation phrases and slash combinations thereof.
std::optional<std::string> filter_headword(std::string_view headword);

/// Parses one raw record. The headword side and definition side are separated
/// by "::", sense slots by "|" (slot counts must agree on both sides), and
/// synonyms within a slot by ";". Each headword synonym of slot i maps to all
/// definition synonyms of slot i. Malformed lines yield an empty result and
/// `malformed` is set.
std::vector<DictEntry> parse_line(std::string_view line, bool* malformed = nullptr);

/// Aggregates parse_line over all lines; '#'-prefixed comment lines and blank
/// lines are ignored without counting as skipped.
Dictionary build_dictionary(const std::vector<std::string>& lines, ParseStats* stats = nullptr);

/// Reads a raw dictionary file and builds the Dictionary. Throws IoFailure.
Dictionary build_dictionary_from_file(const std::string& path, ParseStats* stats = nullptr);

}  // namespace nmt::dictparse
