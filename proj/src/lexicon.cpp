#include "nmt/lexicon.hpp"

#include <algorithm>

#include "nmt/common.hpp"
#include "nmt/text.hpp"

namespace nmt::lexicon {

void FreqTable::save_tsv(const std::string& path) const {
    std::vector<std::pair<std::string, std::uint64_t>> rows(counts_.begin(), counts_.end());
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> lines;
    lines.reserve(rows.size());
    for (const auto& [word, count] : rows) lines.push_back(word + "\t" + std::to_string(count));
    write_lines(path, lines);
}

FreqTable FreqTable::load_tsv(const std::string& path) {
    FreqTable table;
    for (const auto& line : read_lines(path)) {
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != 2) throw FormatError("bad frequency record in " + path + ": " + line);
        table.add(fields[0], std::stoull(fields[1]));
    }
    return table;
}

void LemmaTable::save_tsv(const std::string& path) const {
    std::vector<std::string> lines;
    lines.reserve(map_.size());
    for (const auto& [surface, lemma] : map_) lines.push_back(surface + "\t" + lemma);
    std::sort(lines.begin(), lines.end());
    write_lines(path, lines);
}

LemmaTable LemmaTable::load_tsv(const std::string& path) {
    LemmaTable table;
    for (const auto& line : read_lines(path)) {
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
            throw FormatError("bad lemma record in " + path + ": " + line);
        table.add(fields[0], fields[1]);
    }
    return table;
}

FreqTable count_frequencies(const std::vector<std::vector<std::string>>& corpus) {
    FreqTable table;
    for (const auto& sent : corpus)
        for (const auto& w : sent) table.add(w);
    return table;
}

bool is_rare(const std::string& word, const FreqTable& freq, const dictparse::Dictionary& dict,
             const LemmaTable& lemmas, std::uint64_t threshold) {
    if (!text::has_letter(word)) return false;
    if (freq.count(word) < threshold && dict.contains(word)) return true;
    const std::string& lemma = lemmas.lemma(word);
    return freq.count(lemma) < threshold && dict.contains(lemma);
}

std::vector<std::string> retrieve_definitions(const std::string& word,
                                              const dictparse::Dictionary& dict,
                                              const LemmaTable& lemmas, std::size_t cap) {
    const auto* senses = &dict.lookup(word);
    if (senses->empty()) senses = &dict.lookup(lemmas.lemma(word));
    if (senses->empty())
        throw NotRareError("retrieve_definitions: no entry for '" + word + "' or its lemma");
    if (cap == 0 || senses->size() <= cap) return *senses;
    return {senses->begin(), senses->begin() + static_cast<std::ptrdiff_t>(cap)};
}

std::vector<Annotation> annotate_sentence(const std::vector<std::string>& words,
                                          const FreqTable& freq,
                                          const dictparse::Dictionary& dict,
                                          const LemmaTable& lemmas, const RareWordPolicy& policy,
                                          Mode mode) {
    std::uint64_t threshold =
        mode == Mode::kTrain ? policy.train_threshold : policy.infer_threshold;
    std::vector<Annotation> annotations;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (!is_rare(words[i], freq, dict, lemmas, threshold)) continue;
        annotations.push_back({i, retrieve_definitions(words[i], dict, lemmas, policy.max_definitions)});
    }
    return annotations;
}

}  // namespace nmt::lexicon
