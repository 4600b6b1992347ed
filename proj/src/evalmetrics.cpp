#include "nmt/evalmetrics.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "nmt/text.hpp"

namespace nmt::evalmetrics {

namespace {

void check_corpora(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
    if (hyp.size() != ref.size())
        throw std::invalid_argument("hypothesis/reference segment counts differ");
    if (hyp.empty()) throw std::invalid_argument("empty corpus");
}

using Counts = std::map<std::vector<std::string>, std::size_t>;

Counts ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
    Counts counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[{tokens.begin() + static_cast<std::ptrdiff_t>(i),
                  tokens.begin() + static_cast<std::ptrdiff_t>(i + n)}];
    return counts;
}

}  // namespace

std::vector<std::string> metric_tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char32_t cp : text::decode_utf8(text)) {
        if (text::is_space(cp)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else if (text::is_alnum(cp)) {
            text::append_utf8(current, cp);
        } else {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
            std::string sym;
            text::append_utf8(sym, cp);
            tokens.push_back(std::move(sym));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
            EvalReport* report) {
    check_corpora(hypotheses, references);

    std::array<std::size_t, 4> matches{}, totals{};
    std::size_t hyp_len = 0, ref_len = 0;
    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        auto hyp = metric_tokenize(hypotheses[s]);
        auto ref = metric_tokenize(references[s]);
        hyp_len += hyp.size();
        ref_len += ref.size();
        for (std::size_t n = 1; n <= 4; ++n) {
            auto hyp_counts = ngram_counts(hyp, n);
            auto ref_counts = ngram_counts(ref, n);
            for (const auto& [gram, count] : hyp_counts) {
                auto it = ref_counts.find(gram);
                if (it != ref_counts.end()) matches[n - 1] += std::min(count, it->second);
                totals[n - 1] += count;
            }
        }
    }

    std::array<double, 4> precisions{};
    bool any_zero = false;
    for (std::size_t n = 0; n < 4; ++n) {
        precisions[n] = totals[n] == 0 ? 0.0
                                       : static_cast<double>(matches[n]) /
                                             static_cast<double>(totals[n]);
        if (precisions[n] == 0.0) any_zero = true;
    }
    double bp = 1.0;
    if (hyp_len == 0) {
        bp = 0.0;
        any_zero = true;
    } else if (hyp_len < ref_len) {
        bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    }
    double score = 0.0;
    if (!any_zero) {
        double log_sum = 0.0;
        for (double p : precisions) log_sum += std::log(p);
        score = 100.0 * bp * std::exp(log_sum / 4.0);
    }
    if (report) {
        report->bleu = score;
        report->precisions = precisions;
        report->brevity_penalty = bp;
        report->segments = hypotheses.size();
    }
    return score;
}

double macro_f1(const std::vector<std::string>& hypotheses,
                const std::vector<std::string>& references, EvalReport* report, bool union_vocab) {
    check_corpora(hypotheses, references);

    std::map<std::string, std::size_t> hyp_total, ref_total, match_total;
    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        std::map<std::string, std::size_t> hyp_counts, ref_counts;
        for (const auto& t : metric_tokenize(hypotheses[s])) ++hyp_counts[t];
        for (const auto& t : metric_tokenize(references[s])) ++ref_counts[t];
        for (const auto& [t, c] : hyp_counts) hyp_total[t] += c;
        for (const auto& [t, c] : ref_counts) ref_total[t] += c;
        for (const auto& [t, c] : hyp_counts) {
            auto it = ref_counts.find(t);
            if (it != ref_counts.end()) match_total[t] += std::min(c, it->second);
        }
    }

    std::map<std::string, std::size_t> vocab = ref_total;
    if (union_vocab)
        for (const auto& kv : hyp_total) vocab.emplace(kv.first, 0);

    double f1_sum = 0.0;
    for (const auto& kv : vocab) {
        const std::string& type = kv.first;
        double match = match_total.count(type) ? static_cast<double>(match_total[type]) : 0.0;
        double hyp_c = hyp_total.count(type) ? static_cast<double>(hyp_total[type]) : 0.0;
        double ref_c = ref_total.count(type) ? static_cast<double>(ref_total[type]) : 0.0;
        double precision = hyp_c > 0 ? match / hyp_c : 0.0;
        double recall = ref_c > 0 ? match / ref_c : 0.0;
        double f1 = (precision + recall) > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
        f1_sum += f1;
    }
    double score = vocab.empty() ? 0.0 : 100.0 * f1_sum / static_cast<double>(vocab.size());
    if (report) {
        report->macro_f1 = score;
        report->types_scored = vocab.size();
        report->segments = hypotheses.size();
    }
    return score;
}

EvalReport evaluate(const std::vector<std::string>& hypotheses,
                    const std::vector<std::string>& references) {
    EvalReport report;
    bleu(hypotheses, references, &report);
    macro_f1(hypotheses, references, &report);
    return report;
}

std::string EvalReport::to_string() const {
    std::ostringstream os;
    os.precision(4);
    os << std::fixed << "BLEU=" << bleu << " (p1=" << precisions[0] << " p2=" << precisions[1]
       << " p3=" << precisions[2] << " p4=" << precisions[3] << " BP=" << brevity_penalty
       << ") MacroF1=" << macro_f1;
    return os.str();
}

}  // namespace nmt::evalmetrics
