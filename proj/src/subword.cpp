#include "nmt/subword.hpp"

#include <algorithm>
#include <map>

#include "nmt/common.hpp"
#include "nmt/text.hpp"

namespace nmt::subword {

std::string normalize_punct(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = true;
    auto emit_space = [&]() {
        if (!in_space) out.push_back(' ');
        in_space = true;
    };
    for (char32_t cp : text::decode_utf8(s)) {
        switch (cp) {
            case 0x201C: case 0x201D: case 0x201E: case 0x201F:  // “ ” „ ‟
            case 0x00AB: case 0x00BB: case 0x2039: case 0x203A:  // « » ‹ ›
                in_space = false;
                out.push_back('"');
                break;
            case 0x2018: case 0x2019: case 0x201A: case 0x201B:  // ‘ ’ ‚ ‛
                in_space = false;
                out.push_back('\'');
                break;
            case 0x2013: case 0x2014: case 0x2015:  // – — ―
                in_space = false;
                out.push_back('-');
                break;
            case 0x2026:  // …
                in_space = false;
                out += "...";
                break;
            default:
                if (text::is_space(cp)) {
                    emit_space();
                } else {
                    in_space = false;
                    text::append_utf8(out, cp);
                }
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::vector<std::string> word_tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    for (const auto& chunk : split_ws(s)) {
        auto cps = text::decode_utf8(chunk);
        std::size_t begin = 0, end = cps.size();
        while (begin < end && !text::is_alnum(cps[begin])) ++begin;
        while (end > begin && !text::is_alnum(cps[end - 1])) --end;
        for (std::size_t i = 0; i < begin; ++i) tokens.push_back(text::encode_utf8({cps[i]}));
        if (begin < end) tokens.push_back(text::encode_utf8({cps.begin() + begin, cps.begin() + end}));
        for (std::size_t i = end; i < cps.size(); ++i) tokens.push_back(text::encode_utf8({cps[i]}));
    }
    return tokens;
}

void BpeModel::add_merge(MergePair p) {
    vocab_.insert(p.left);
    vocab_.insert(p.right);
    std::string merged = p.left.substr(0, p.left.size() - 2);  // left always carries the marker
    merged += p.right;
    vocab_.insert(merged);
    rank_.emplace(p, static_cast<int>(merges_.size()));
    merges_.push_back(std::move(p));
}

int BpeModel::rank(const std::string& left, const std::string& right) const {
    auto it = rank_.find(MergePair{left, right});
    return it == rank_.end() ? -1 : it->second;
}

void BpeModel::save(const std::string& path) const {
    std::vector<std::string> lines;
    lines.push_back("#merges=" + std::to_string(merges_.size()));
    for (const auto& m : merges_) lines.push_back(m.left + " " + m.right);
    write_lines(path, lines);
}

BpeModel BpeModel::load(const std::string& path) {
    auto lines = read_lines(path);
    if (lines.empty() || lines[0].rfind("#merges=", 0) != 0)
        throw FormatError("bad BPE model header in " + path);
    std::size_t declared = std::stoul(lines[0].substr(8));
    BpeModel model;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto parts = split(lines[i], ' ');
        if (parts.size() != 2) throw FormatError("bad merge line in " + path + ": " + lines[i]);
        model.add_merge({parts[0], parts[1]});
    }
    if (model.num_merges() != declared)
        throw FormatError("BPE model merge count mismatch in " + path);
    return model;
}

namespace {

// A word as its current symbol sequence: characters first, then progressively
// merged pieces. Non-final symbols carry the continuation marker.
std::vector<std::string> char_symbols(std::string_view word) {
    auto cps = text::decode_utf8(word);
    std::vector<std::string> symbols;
    symbols.reserve(cps.size());
    for (std::size_t i = 0; i < cps.size(); ++i) {
        std::string s = text::encode_utf8({cps[i]});
        if (i + 1 < cps.size()) s += kMarker;
        symbols.push_back(std::move(s));
    }
    return symbols;
}

std::string merge_symbols(const std::string& left, const std::string& right) {
    return left.substr(0, left.size() - 2) + right;
}

}  // namespace

BpeModel learn_bpe(const std::vector<std::vector<std::string>>& corpus, std::size_t num_merges) {
    // Word-type frequencies; merging operates on types, weighted by count.
    std::map<std::string, std::uint64_t> type_freq;
    for (const auto& sent : corpus)
        for (const auto& w : sent)
            if (!w.empty()) ++type_freq[w];

    std::vector<std::vector<std::string>> types;
    std::vector<std::uint64_t> freqs;
    BpeModel model;
    for (const auto& [word, freq] : type_freq) {
        auto symbols = char_symbols(word);
        for (const auto& s : symbols) model.add_symbol(s);
        types.push_back(std::move(symbols));
        freqs.push_back(freq);
    }

    for (std::size_t step = 0; step < num_merges; ++step) {
        std::map<MergePair, std::uint64_t> pair_freq;
        for (std::size_t t = 0; t < types.size(); ++t)
            for (std::size_t i = 0; i + 1 < types[t].size(); ++i)
                pair_freq[{types[t][i], types[t][i + 1]}] += freqs[t];

        // Most frequent pair; the std::map iteration order makes ties resolve
        // to the lexicographically smallest pair.
        const MergePair* best = nullptr;
        std::uint64_t best_freq = 0;
        for (const auto& [pair, freq] : pair_freq) {
            if (freq > best_freq) {
                best = &pair;
                best_freq = freq;
            }
        }
        if (!best || best_freq < 2) break;

        MergePair chosen = *best;
        std::string merged = merge_symbols(chosen.left, chosen.right);
        for (auto& symbols : types) {
            for (std::size_t i = 0; i + 1 < symbols.size();) {
                if (symbols[i] == chosen.left && symbols[i + 1] == chosen.right) {
                    symbols[i] = merged;
                    symbols.erase(symbols.begin() + i + 1);
                } else {
                    ++i;
                }
            }
        }
        model.add_merge(std::move(chosen));
    }
    return model;
}

std::vector<std::string> apply_bpe(const BpeModel& model, std::string_view word, double dropout_p,
                                   Rng& rng) {
    auto symbols = char_symbols(word);
    if (symbols.size() < 2) return symbols;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    while (symbols.size() > 1) {
        int best_rank = -1;
        std::size_t best_pos = 0;
        for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
            int r = model.rank(symbols[i], symbols[i + 1]);
            if (r < 0) continue;
            if (dropout_p > 0.0 && unit(rng) < dropout_p) continue;
            if (best_rank < 0 || r < best_rank) {
                best_rank = r;
                best_pos = i;
            }
        }
        if (best_rank < 0) break;
        symbols[best_pos] = merge_symbols(symbols[best_pos], symbols[best_pos + 1]);
        symbols.erase(symbols.begin() + best_pos + 1);
    }
    return symbols;
}

std::vector<std::string> unbpe(const std::vector<std::string>& tokens) {
    std::vector<std::string> words;
    std::string current;
    for (const auto& tok : tokens) {
        if (has_marker(tok)) {
            current += tok.substr(0, tok.size() - 2);
        } else {
            current += tok;
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty())
        throw FormatError("dangling continuation marker at end of subword sequence");
    return words;
}

}  // namespace nmt::subword
