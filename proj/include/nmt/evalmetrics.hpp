#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace nmt::evalmetrics {

struct EvalReport {
    double bleu = 0.0;                          // [0, 100]
    std::array<double, 4> precisions{};         // p1..p4
    double brevity_penalty = 1.0;
    double macro_f1 = 0.0;                      // [0, 100]
    std::size_t types_scored = 0;
    std::size_t segments = 0;

    std::string to_string() const;
};

/// mteval-style tokenization: every non-alphanumeric codepoint becomes its
/// own token, case untouched. Idempotent on its own joined output.
std::vector<std::string> metric_tokenize(std::string_view text);

/// Corpus BLEU with n = 1..4: clipped n-gram matches aggregated over
/// segments, strict zero handling (any p_n = 0 gives score 0), and
/// BP = min(1, exp(1 - ref_len/hyp_len)). Throws LengthMismatch/EmptyCorpus
/// as std::invalid_argument.
double bleu(const std::vector<std::string>& hypotheses,
            const std::vector<std::string>& references, EvalReport* report = nullptr);

/// Macro-averaged per-type F1 between hypothesis and reference corpora.
/// `union_vocab` averages over the union of both vocabularies (default);
/// otherwise only reference types are scored.
double macro_f1(const std::vector<std::string>& hypotheses,
                const std::vector<std::string>& references, EvalReport* report = nullptr,
                bool union_vocab = true);

/// Both metrics in one report.
EvalReport evaluate(const std::vector<std::string>& hypotheses,
                    const std::vector<std::string>& references);

}  // namespace nmt::evalmetrics
