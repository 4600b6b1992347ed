#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace nmt::subword {

using Rng = std::mt19937_64;

/// Continuation marker carried by every non-final piece of a word
/// ("T@@ ar@@ n@@ k@@ app@@ e"). Input words must not contain the literal
/// substring "@@"; natural word-tokenized text never does.
inline constexpr const char* kMarker = "@@";

/// Applies a fixed replacement table: curly/angled quotes to ASCII quotes,
/// en/em dashes to '-', the ellipsis character to "...", non-breaking and
/// zero-width spaces to plain spaces; whitespace runs collapse to single
/// spaces and the result is trimmed. Idempotent.
std::string normalize_punct(std::string_view s);

/// Splits on whitespace, then detaches leading/trailing punctuation runs of
/// each chunk as separate single-character tokens. Internal hyphens and
/// apostrophes stay attached ("battle-hardened", "don't").
std::vector<std::string> word_tokenize(std::string_view s);

struct MergePair {
    std::string left, right;
    auto operator<=>(const MergePair&) const = default;
};

struct MergePairHash {
    std::size_t operator()(const MergePair& p) const {
        std::hash<std::string> h;
        return h(p.left) * 1000003u ^ h(p.right);
    }
};

class BpeModel {
public:
    void add_merge(MergePair p);

    // Rank of a pair, or -1 when the pair was never learned.
    int rank(const std::string& left, const std::string& right) const;

    std::size_t num_merges() const { return merges_.size(); }
    const std::vector<MergePair>& merges() const { return merges_; }

    const std::unordered_set<std::string>& vocabulary() const { return vocab_; }
    void add_symbol(const std::string& s) { vocab_.insert(s); }

    /// File format: header "#merges=<n>", then one merge per line
    /// "left<SPACE>right" in rank order.
    void save(const std::string& path) const;
    static BpeModel load(const std::string& path);

private:
    std::vector<MergePair> merges_;
    std::unordered_map<MergePair, int, MergePairHash> rank_;
    std::unordered_set<std::string> vocab_;
};

/// Learns BPE merges over word-tokenized sentences. Words start as character
/// sequences with the marker on all non-final symbols; the most frequent
/// adjacent pair is merged repeatedly (ties broken by lexicographic order of
/// the pair) until `num_merges` merges are done or no pair occurs twice.
BpeModel learn_bpe(const std::vector<std::vector<std::string>>& corpus, std::size_t num_merges);

/// Segments one word by greedy lowest-rank-first merging. With dropout_p > 0
/// every candidate merge is independently skipped with that probability at
/// each step; when no candidate survives a step, merging stops. dropout_p = 0
/// is deterministic and seed-independent.
std::vector<std::string> apply_bpe(const BpeModel& model, std::string_view word, double dropout_p,
                                   Rng& rng);

/// Inverse of the marker convention: glues marker-suffixed pieces to their
/// successors. Throws FormatError (DanglingMarker) when the sequence ends
/// with a marked piece.
std::vector<std::string> unbpe(const std::vector<std::string>& tokens);

inline bool has_marker(std::string_view tok) {
    return tok.size() >= 2 && tok.substr(tok.size() - 2) == kMarker;
}

}  // namespace nmt::subword
