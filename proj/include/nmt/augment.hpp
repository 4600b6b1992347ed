#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmt/lexicon.hpp"
#include "nmt/subword.hpp"

namespace nmt::augment {

inline constexpr const char* kEosToken = "<eos>";

/// Half-open subword index interval.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool operator==(const Span&) const = default;
    bool contains(std::size_t i) const { return i >= begin && i < end; }
    std::size_t size() const { return end - begin; }
};

/// Ties one sense's definition span to the span of the word it defines.
/// Definition spans of distinct sense ids are disjoint; defined spans lie
/// strictly before the EOS index, definition spans strictly after.
struct SpanLink {
    Span defined;     // subwords of the annotated source word
    Span definition;  // subwords of one sense appended after EOS
    int sense_id = 0;
    bool operator==(const SpanLink&) const = default;
};

struct AugmentedExample {
    std::vector<std::string> tokens;  // source subwords ++ <eos> ++ definition subwords
    std::size_t eos_index = 0;
    std::vector<SpanLink> links;
    bool operator==(const AugmentedExample&) const = default;
    std::size_t size() const { return tokens.size(); }
};

/// Two n-by-n binary masks; entry 1 at (i,j) means query i may NOT attend
/// key j. m1 opens defined-word -> definition attention, m2 the reverse.
struct MaskPair {
    std::size_t n = 0;
    std::vector<std::uint8_t> m1, m2;  // row-major n*n

    explicit MaskPair(std::size_t size = 0) : n(size), m1(size * size, 0), m2(size * size, 0) {}
    std::uint8_t& at1(std::size_t i, std::size_t j) { return m1[i * n + j]; }
    std::uint8_t& at2(std::size_t i, std::size_t j) { return m2[i * n + j]; }
    std::uint8_t at1(std::size_t i, std::size_t j) const { return m1[i * n + j]; }
    std::uint8_t at2(std::size_t i, std::size_t j) const { return m2[i * n + j]; }
    bool operator==(const MaskPair&) const = default;
};

struct AugmentResult {
    AugmentedExample example;
    bool augmentation_dropped = false;  // length cap exceeded; emitted un-augmented
};

/// Segments the source words with the BPE model (tracking word -> subword
/// spans), appends <eos> and then the definition subwords of each annotation
/// in word order then sense order, and records the span links. Definitions
/// are plain tokens; no separators are inserted. When the augmented length
/// would exceed max_tokens, the example is emitted un-augmented and
/// `augmentation_dropped` is set.
AugmentResult build_augmented(const std::vector<std::string>& source_words,
                              const std::vector<lexicon::Annotation>& annotations,
                              const subword::BpeModel& bpe, double dropout_p, subword::Rng& rng,
                              std::size_t max_tokens = 0);

/// Mask construction. Both masks allow the full source+EOS block and, for
/// definition subwords, the subwords of the same sense. m1 additionally
/// allows defined-span queries onto definition-span keys; m2 the transposed
/// direction. Everything else is masked; in particular two senses of the
/// same word cannot attend each other.
MaskPair build_masks(const AugmentedExample& example);

/// One-line record: tokens joined by spaces, TAB, "eos=<i>", TAB, semicolon-
/// separated links "a-b:c-d:s". Round trips bit-exactly.
std::string serialize_example(const AugmentedExample& example);
AugmentedExample deserialize_example(const std::string& record);

}  // namespace nmt::augment
