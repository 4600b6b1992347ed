#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nmt/dictparse.hpp"

namespace nmt::lexicon {

/// Word occurrence counts over the word-tokenized training source corpus.
/// Absent words have implicit count 0.
class FreqTable {
public:
    void add(const std::string& word, std::uint64_t n = 1) {
        counts_[word] += n;
        total_ += n;
    }
    std::uint64_t count(const std::string& word) const {
        auto it = counts_.find(word);
        return it == counts_.end() ? 0 : it->second;
    }
    std::uint64_t total() const { return total_; }
    std::size_t distinct() const { return counts_.size(); }
    const std::unordered_map<std::string, std::uint64_t>& counts() const { return counts_; }

    /// TSV "word<TAB>count", sorted by descending count (ties by word).
    void save_tsv(const std::string& path) const;
    static FreqTable load_tsv(const std::string& path);

private:
    std::unordered_map<std::string, std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

/// Surface form -> lemma. Unmapped words fall back to themselves, so an empty
/// table degrades to surface-form matching.
class LemmaTable {
public:
    void add(const std::string& surface, const std::string& lemma) { map_[surface] = lemma; }
    const std::string& lemma(const std::string& word) const {
        auto it = map_.find(word);
        return it == map_.end() ? word : it->second;
    }
    std::size_t size() const { return map_.size(); }

    /// TSV "surface<TAB>lemma", one pair per line.
    void save_tsv(const std::string& path) const;
    static LemmaTable load_tsv(const std::string& path);

private:
    std::unordered_map<std::string, std::string> map_;
};

struct RareWordPolicy {
    std::uint64_t train_threshold = 10;
    std::uint64_t infer_threshold = 10;
    std::size_t max_definitions = 10;  // 0 means unbounded
};

enum class Mode { kTrain, kInfer };

FreqTable count_frequencies(const std::vector<std::vector<std::string>>& corpus);

/// A word is rare iff (a) its count is strictly below the threshold and it
/// has a dictionary entry, or (b) clause (a) fails but its lemma satisfies
/// both conditions. Tokens without any letter are never rare.
bool is_rare(const std::string& word, const FreqTable& freq, const dictparse::Dictionary& dict,
             const LemmaTable& lemmas, std::uint64_t threshold);

struct NotRareError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Senses of the word itself if present, else of its lemma, truncated to the
/// first `cap` senses (cap 0 = unbounded). Throws NotRareError when neither
/// is in the dictionary; callers must classify with is_rare first.
std::vector<std::string> retrieve_definitions(const std::string& word,
                                              const dictparse::Dictionary& dict,
                                              const LemmaTable& lemmas, std::size_t cap);

struct Annotation {
    std::size_t word_index;
    std::vector<std::string> definitions;
    bool operator==(const Annotation&) const = default;
};

/// Classifies every word with the mode's threshold and attaches capped
/// definition lists, in left-to-right order. Repeated rare surface forms are
/// annotated at every position.
std::vector<Annotation> annotate_sentence(const std::vector<std::string>& words,
                                          const FreqTable& freq,
                                          const dictparse::Dictionary& dict,
                                          const LemmaTable& lemmas, const RareWordPolicy& policy,
                                          Mode mode);

}  // namespace nmt::lexicon
