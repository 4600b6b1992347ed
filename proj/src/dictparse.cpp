#include "nmt/dictparse.hpp"

#include <algorithm>
#include <array>

#include "nmt/common.hpp"
#include "nmt/text.hpp"

namespace nmt::dictparse {

namespace {

std::string collapse_ws(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = true;  // also trims leading spaces
    for (char32_t cp : text::decode_utf8(s)) {
        if (text::is_space(cp)) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            text::append_utf8(out, cp);
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

constexpr std::array<const char*, 4> kObjectAbbrevs = {"jdm.", "jdn.", "jds.", "etw."};

}  // namespace

std::string strip_metadata(std::string_view fragment) {
    std::string kept;
    kept.reserve(fragment.size());
    std::size_t i = 0;
    while (i < fragment.size()) {
        char c = fragment[i];
        char closer = 0;
        if (c == '{') closer = '}';
        else if (c == '[') closer = ']';
        else if (c == '(') closer = ')';
        if (closer) {
            std::size_t end = fragment.find(closer, i + 1);
            if (end == std::string_view::npos) break;  // unbalanced opener: drop the rest
            i = end + 1;
        } else {
            kept.push_back(c);
            ++i;
        }
    }
    return collapse_ws(kept);
}

std::optional<std::string> filter_headword(std::string_view headword) {
    std::string word(headword);
    if (word.rfind("sich ", 0) == 0) word = word.substr(5);
    if (word.empty()) return std::nullopt;

    // Object abbreviations, their slash combinations, and preposition +
    // abbreviation phrases all surface as a token containing one of the four
    // abbreviation forms.
    for (const auto& token : split_ws(word)) {
        for (const char* a : kObjectAbbrevs)
            if (token.find(a) != std::string::npos) return std::nullopt;
    }
    for (char32_t cp : text::decode_utf8(word)) {
        if (!text::is_letter(cp) && cp != '-' && cp != ' ') return std::nullopt;
    }
    if (!text::has_letter(word)) return std::nullopt;
    return word;
}

std::vector<DictEntry> parse_line(std::string_view line, bool* malformed) {
    if (malformed) *malformed = false;
    auto fail = [&]() -> std::vector<DictEntry> {
        if (malformed) *malformed = true;
        return {};
    };

    std::size_t sep = line.find("::");
    if (sep == std::string_view::npos) return fail();
    if (line.find("::", sep + 2) != std::string_view::npos) return fail();

    auto head_slots = split(line.substr(0, sep), '|');
    auto def_slots = split(line.substr(sep + 2), '|');
    if (head_slots.size() != def_slots.size()) return fail();

    std::vector<DictEntry> entries;
    for (std::size_t slot = 0; slot < head_slots.size(); ++slot) {
        std::vector<std::string> senses;
        for (const auto& d : split(def_slots[slot], ';')) {
            std::string sense = strip_metadata(d);
            if (!sense.empty()) senses.push_back(std::move(sense));
        }
        if (senses.empty()) continue;
        for (const auto& h : split(head_slots[slot], ';')) {
            std::string stripped = strip_metadata(h);
            if (stripped.empty()) continue;
            auto kept = filter_headword(stripped);
            if (!kept) continue;
            entries.push_back({*kept, senses});
        }
    }
    return entries;
}

const std::vector<std::string>& Dictionary::lookup(const std::string& word) const {
    static const std::vector<std::string> kEmpty;
    auto it = entries_.find(word);
    return it == entries_.end() ? kEmpty : it->second;
}

void Dictionary::add(const std::string& headword, const std::vector<std::string>& senses) {
    auto& list = entries_[headword];
    for (const auto& s : senses) {
        if (std::find(list.begin(), list.end(), s) == list.end()) list.push_back(s);
    }
    if (list.empty()) entries_.erase(headword);
}

Dictionary build_dictionary(const std::vector<std::string>& lines, ParseStats* stats) {
    Dictionary dict;
    ParseStats st;
    for (const auto& line : lines) {
        if (line.empty() || line[0] == '#') continue;
        ++st.lines_read;
        bool malformed = false;
        auto entries = parse_line(line, &malformed);
        if (malformed) {
            ++st.lines_skipped;
            continue;
        }
        for (const auto& e : entries) dict.add(e.headword, e.senses);
    }
    st.entries_kept = dict.size();
    if (stats) *stats = st;
    return dict;
}

Dictionary build_dictionary_from_file(const std::string& path, ParseStats* stats) {
    return build_dictionary(read_lines(path), stats);
}

void Dictionary::save_tsv(const std::string& path) const {
    std::vector<std::string> lines;
    lines.reserve(entries_.size());
    for (const auto& [head, senses] : entries_) {
        std::string line = head;
        for (const auto& s : senses) {
            line += '\t';
            line += s;
        }
        lines.push_back(std::move(line));
    }
    write_lines(path, lines);
}

Dictionary Dictionary::load_tsv(const std::string& path) {
    Dictionary dict;
    for (const auto& line : read_lines(path)) {
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() < 2 || fields[0].empty())
            throw FormatError("bad dictionary record in " + path + ": " + line);
        dict.add(fields[0], {fields.begin() + 1, fields.end()});
    }
    return dict;
}

}  // namespace nmt::dictparse
