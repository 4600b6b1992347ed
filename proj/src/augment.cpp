#include "nmt/augment.hpp"

#include <stdexcept>

#include "nmt/common.hpp"

namespace nmt::augment {

AugmentResult build_augmented(const std::vector<std::string>& source_words,
                              const std::vector<lexicon::Annotation>& annotations,
                              const subword::BpeModel& bpe, double dropout_p, subword::Rng& rng,
                              std::size_t max_tokens) {
    AugmentedExample ex;
    std::vector<Span> word_spans;
    word_spans.reserve(source_words.size());
    for (const auto& w : source_words) {
        auto pieces = subword::apply_bpe(bpe, w, dropout_p, rng);
        word_spans.push_back({ex.tokens.size(), ex.tokens.size() + pieces.size()});
        ex.tokens.insert(ex.tokens.end(), pieces.begin(), pieces.end());
    }
    ex.eos_index = ex.tokens.size();
    ex.tokens.push_back(kEosToken);

    int sense_id = 0;
    for (const auto& ann : annotations) {
        if (ann.word_index >= source_words.size())
            throw std::out_of_range("annotation references word index " +
                                    std::to_string(ann.word_index) + " in a sentence of " +
                                    std::to_string(source_words.size()) + " words");
        for (const auto& sense : ann.definitions) {
            Span def_span{ex.tokens.size(), ex.tokens.size()};
            for (const auto& w : subword::word_tokenize(sense)) {
                auto pieces = subword::apply_bpe(bpe, w, dropout_p, rng);
                ex.tokens.insert(ex.tokens.end(), pieces.begin(), pieces.end());
            }
            def_span.end = ex.tokens.size();
            if (def_span.size() == 0) continue;  // empty sense text, nothing to link
            ex.links.push_back({word_spans[ann.word_index], def_span, sense_id++});
        }
    }

    if (max_tokens > 0 && ex.tokens.size() > max_tokens && !ex.links.empty()) {
        ex.tokens.resize(ex.eos_index + 1);
        ex.links.clear();
        return {std::move(ex), true};
    }
    return {std::move(ex), false};
}

MaskPair build_masks(const AugmentedExample& example) {
    const std::size_t n = example.size();
    const std::size_t eos = example.eos_index;
    MaskPair masks(n);

    // Start from "everything masked", then open the allowed pairs.
    std::fill(masks.m1.begin(), masks.m1.end(), 1);
    std::fill(masks.m2.begin(), masks.m2.end(), 1);

    for (std::size_t i = 0; i <= eos; ++i)
        for (std::size_t j = 0; j <= eos; ++j) {
            masks.at1(i, j) = 0;
            masks.at2(i, j) = 0;
        }

    for (const auto& link : example.links) {
        // Definition subwords attend each other within the same sense.
        for (std::size_t i = link.definition.begin; i < link.definition.end; ++i)
            for (std::size_t j = link.definition.begin; j < link.definition.end; ++j) {
                masks.at1(i, j) = 0;
                masks.at2(i, j) = 0;
            }
        for (std::size_t i = link.defined.begin; i < link.defined.end; ++i)
            for (std::size_t j = link.definition.begin; j < link.definition.end; ++j) {
                masks.at1(i, j) = 0;  // source word -> its definition
                masks.at2(j, i) = 0;  // definition -> the word it defines
            }
    }
    return masks;
}

std::string serialize_example(const AugmentedExample& example) {
    std::string out = join(example.tokens, " ");
    out += "\teos=" + std::to_string(example.eos_index) + "\t";
    for (std::size_t i = 0; i < example.links.size(); ++i) {
        const auto& l = example.links[i];
        if (i) out += ';';
        out += std::to_string(l.defined.begin) + "-" + std::to_string(l.defined.end) + ":" +
               std::to_string(l.definition.begin) + "-" + std::to_string(l.definition.end) + ":" +
               std::to_string(l.sense_id);
    }
    return out;
}

namespace {

Span parse_span(const std::string& s) {
    auto parts = split(s, '-');
    if (parts.size() != 2) throw FormatError("bad span: " + s);
    return {std::stoul(parts[0]), std::stoul(parts[1])};
}

}  // namespace

AugmentedExample deserialize_example(const std::string& record) {
    auto fields = split(record, '\t');
    if (fields.size() != 3) throw FormatError("augmented record needs 3 tab fields: " + record);
    AugmentedExample ex;
    ex.tokens = split_ws(fields[0]);
    if (fields[1].rfind("eos=", 0) != 0) throw FormatError("missing eos field: " + record);
    try {
        ex.eos_index = std::stoul(fields[1].substr(4));
        if (!fields[2].empty()) {
            for (const auto& part : split(fields[2], ';')) {
                auto cols = split(part, ':');
                if (cols.size() != 3) throw FormatError("bad link: " + part);
                ex.links.push_back({parse_span(cols[0]), parse_span(cols[1]), std::stoi(cols[2])});
            }
        }
    } catch (const std::logic_error&) {  // stoul/stoi failures
        throw FormatError("malformed augmented record: " + record);
    }
    if (ex.eos_index >= ex.tokens.size() || ex.tokens[ex.eos_index] != kEosToken)
        throw FormatError("eos index does not point at " + std::string(kEosToken) + ": " + record);
    for (const auto& l : ex.links) {
        if (l.defined.begin >= l.defined.end || l.defined.end > ex.eos_index ||
            l.definition.begin <= ex.eos_index || l.definition.begin >= l.definition.end ||
            l.definition.end > ex.tokens.size())
            throw FormatError("link spans out of bounds: " + record);
    }
    return ex;
}

}  // namespace nmt::augment
