#include "nmt/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "nmt/augment.hpp"
#include "nmt/evalmetrics.hpp"

namespace nmt::pipeline {

namespace {

std::size_t word_count(const std::string& text) { return subword::word_tokenize(text).size(); }

}  // namespace

std::vector<SentencePair> clean_corpus(const std::vector<SentencePair>& pairs,
                                       const CleanPolicy& policy, CleanStats* stats) {
    CleanStats st;
    std::vector<SentencePair> kept;
    std::unordered_set<std::string> seen;
    for (const auto& [raw_src, raw_tgt] : pairs) {
        ++st.read;
        std::string src = subword::normalize_punct(raw_src);
        std::string tgt = subword::normalize_punct(raw_tgt);
        if (policy.drop_empty && (src.empty() || tgt.empty())) {
            ++st.dropped_empty;
            continue;
        }
        if (policy.drop_duplicates && !seen.insert(src + '\t' + tgt).second) {
            ++st.dropped_duplicate;
            continue;
        }
        std::size_t len_src = word_count(src);
        std::size_t len_tgt = word_count(tgt);
        if (len_src > policy.max_len || len_tgt > policy.max_len) {
            ++st.dropped_length;
            continue;
        }
        double ratio_st = static_cast<double>(len_src) / static_cast<double>(len_tgt);
        bool violates = ratio_st > policy.max_ratio;
        if (!policy.one_sided_ratio)
            violates = violates || 1.0 / ratio_st > policy.max_ratio;
        if (violates) {
            ++st.dropped_ratio;
            continue;
        }
        kept.emplace_back(std::move(src), std::move(tgt));
        ++st.kept;
    }
    if (stats) *stats = st;
    return kept;
}

std::vector<SentencePair> dict_as_parallel(const dictparse::Dictionary& dict) {
    std::vector<SentencePair> pairs;
    for (const auto& [head, senses] : dict.entries())
        for (const auto& sense : senses) pairs.emplace_back(head, sense);
    return pairs;
}

std::map<std::string, std::string> parse_config_text(const std::vector<std::string>& lines) {
    std::map<std::string, std::string> map;
    std::string section;
    for (const auto& raw : lines) {
        std::string line = raw;
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line is not key=value: " + raw);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty config key in: " + raw);
        map[section.empty() ? key : section + "." + key] = value;
    }
    return map;
}

namespace {

class ConfigReader {
public:
    explicit ConfigReader(std::map<std::string, std::string> map) : map_(std::move(map)) {}

    bool has(const std::string& key) const { return map_.count(key) != 0; }

    std::string str(const std::string& key, const std::string& fallback) {
        auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        used_.insert(key);
        return it->second;
    }
    double num(const std::string& key, double fallback) {
        auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        used_.insert(key);
        try {
            std::size_t pos = 0;
            double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument(it->second);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("bad number for " + key + ": " + it->second);
        }
    }
    long integer(const std::string& key, long fallback) {
        double v = num(key, static_cast<double>(fallback));
        auto i = static_cast<long>(v);
        if (static_cast<double>(i) != v) throw ConfigError(key + " must be an integer");
        return i;
    }
    bool flag(const std::string& key, bool fallback) {
        auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        used_.insert(key);
        if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
        if (it->second == "false" || it->second == "0" || it->second == "no") return false;
        throw ConfigError("bad boolean for " + key + ": " + it->second);
    }
    void finish() const {
        for (const auto& kv : map_)
            if (!used_.count(kv.first)) throw ConfigError("unknown config key: " + kv.first);
    }

private:
    std::map<std::string, std::string> map_;
    std::set<std::string> used_;
};

}  // namespace

RunConfig config_from_map(const std::map<std::string, std::string>& map) {
    ConfigReader r(map);
    RunConfig c;
    c.seed = static_cast<std::uint64_t>(r.integer("seed", 1));
    c.mode = r.str("mode", "masking");
    if (c.mode != "baseline" && c.mode != "parallel" && c.mode != "masking")
        throw ConfigError("mode must be baseline, parallel, or masking");
    c.work_dir = r.str("work_dir", "work");

    c.paths.train_src = r.str("paths.train_src", "");
    c.paths.train_tgt = r.str("paths.train_tgt", "");
    c.paths.valid_src = r.str("paths.valid_src", "");
    c.paths.valid_tgt = r.str("paths.valid_tgt", "");
    c.paths.dict = r.str("paths.dict", "");
    c.paths.lemmas = r.str("paths.lemmas", "");

    c.clean.max_len = static_cast<std::size_t>(r.integer("clean.max_len", 256));
    c.clean.max_ratio = r.num("clean.max_ratio", 1.3);
    c.clean.one_sided_ratio = r.flag("clean.one_sided_ratio", false);

    c.bpe_merges = static_cast<std::size_t>(r.integer("bpe.merges", 8000));
    c.bpe_dropout = r.num("bpe.dropout", 0.1);
    if (c.bpe_dropout < 0.0 || c.bpe_dropout > 1.0) throw ConfigError("bpe.dropout must be in [0,1]");

    c.policy.train_threshold = static_cast<std::uint64_t>(r.integer("policy.train_threshold", 10));
    c.policy.infer_threshold = static_cast<std::uint64_t>(r.integer("policy.infer_threshold", 10));
    if (c.policy.train_threshold < 1 || c.policy.infer_threshold < 1)
        throw ConfigError("rare-word thresholds must be >= 1");
    c.policy.max_definitions = static_cast<std::size_t>(r.integer("policy.max_definitions", 10));

    c.model.d_model = static_cast<int>(r.integer("model.d_model", 512));
    c.model.d_ffn = static_cast<int>(r.integer("model.d_ffn", 2048));
    c.model.layers = static_cast<int>(r.integer("model.layers", 6));
    c.model.heads = static_cast<int>(r.integer("model.heads", 8));
    c.model.dropout_p = r.num("model.dropout", 0.1);
    c.model.label_smoothing = r.num("model.label_smoothing", 0.1);
    c.model.max_len = static_cast<int>(r.integer("model.max_len", 256));
    c.model.mask_definitions_in_cross_attention = r.flag("model.mask_cross_attention", false);

    c.schedule.init_lr = r.num("schedule.init_lr", 3e-4);
    c.schedule.decay_factor = r.num("schedule.decay_factor", 0.8);
    c.schedule.patience = static_cast<int>(r.integer("schedule.patience", 3));
    c.schedule.min_lr = r.num("schedule.min_lr", 5e-5);
    c.schedule.early_stop = static_cast<int>(r.integer("schedule.early_stop", 20));
    c.schedule.max_epochs = static_cast<int>(r.integer("schedule.max_epochs", 250));
    c.schedule.batch_tokens = static_cast<int>(r.integer("schedule.batch_tokens", 4096));

    c.beam = static_cast<int>(r.integer("translate.beam", 4));
    if (c.beam < 1) throw ConfigError("translate.beam must be >= 1");
    c.ablate_masks = r.flag("translate.ablate_masks", false);
    c.translate_input = r.str("translate.input", "");
    c.translate_output = r.str("translate.output", "");
    c.eval_hyp = r.str("evaluate.hyp", "");
    c.eval_ref = r.str("evaluate.ref", "");
    c.heatmap_sentence = r.str("heatmap.sentence", "");
    c.heatmap_output = r.str("heatmap.output", "");

    r.finish();
    return c;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    if (!file_exists(path)) throw ConfigError("config file not found: " + path);
    auto map = parse_config_text(read_lines(path));
    for (const auto& ov : overrides) {
        auto eq = ov.find('=');
        if (eq == std::string::npos) throw ConfigError("override is not key=value: " + ov);
        map[trim(ov.substr(0, eq))] = trim(ov.substr(eq + 1));
    }
    if (const char* env_seed = std::getenv("NMT_SEED")) map["seed"] = env_seed;
    return config_from_map(map);
}

namespace {

void require_artifact(const std::string& path, const std::string& hint) {
    if (path.empty() || !file_exists(path))
        throw MissingArtifact("missing artifact: " + (path.empty() ? "(unset path)" : path) +
                              " (" + hint + ")");
}

std::vector<SentencePair> read_pair_files(const std::string& src_path,
                                          const std::string& tgt_path) {
    auto src = read_lines(src_path);
    auto tgt = read_lines(tgt_path);
    if (src.size() != tgt.size())
        throw FormatError("parallel files differ in length: " + src_path + " vs " + tgt_path);
    std::vector<SentencePair> pairs;
    pairs.reserve(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) pairs.emplace_back(src[i], tgt[i]);
    return pairs;
}

std::vector<std::vector<std::string>> tokenize_lines(const std::vector<std::string>& lines) {
    std::vector<std::vector<std::string>> out;
    out.reserve(lines.size());
    for (const auto& l : lines) out.push_back(subword::word_tokenize(l));
    return out;
}

void stage_clean(const RunConfig& cfg) {
    require_artifact(cfg.paths.train_src, "paths.train_src");
    require_artifact(cfg.paths.train_tgt, "paths.train_tgt");
    CleanStats stats;
    auto kept = clean_corpus(read_pair_files(cfg.paths.train_src, cfg.paths.train_tgt), cfg.clean,
                             &stats);
    std::vector<std::string> src, tgt;
    for (auto& [s, t] : kept) {
        src.push_back(std::move(s));
        tgt.push_back(std::move(t));
    }
    write_lines(cfg.artifact("train.src"), src);
    write_lines(cfg.artifact("train.tgt"), tgt);
    std::cerr << "clean: read=" << stats.read << " kept=" << stats.kept
              << " empty=" << stats.dropped_empty << " duplicate=" << stats.dropped_duplicate
              << " length=" << stats.dropped_length << " ratio=" << stats.dropped_ratio << "\n";

    // Validation pairs are normalized but never filtered.
    if (!cfg.paths.valid_src.empty()) {
        require_artifact(cfg.paths.valid_src, "paths.valid_src");
        require_artifact(cfg.paths.valid_tgt, "paths.valid_tgt");
        std::vector<std::string> vsrc, vtgt;
        for (const auto& [s, t] : read_pair_files(cfg.paths.valid_src, cfg.paths.valid_tgt)) {
            vsrc.push_back(subword::normalize_punct(s));
            vtgt.push_back(subword::normalize_punct(t));
        }
        write_lines(cfg.artifact("valid.src"), vsrc);
        write_lines(cfg.artifact("valid.tgt"), vtgt);
    }
}

void stage_learn_bpe(const RunConfig& cfg) {
    require_artifact(cfg.artifact("train.src"), "run the clean stage first");
    require_artifact(cfg.artifact("train.tgt"), "run the clean stage first");
    // Shared vocabulary: one model learned on source and target together.
    auto corpus = tokenize_lines(read_lines(cfg.artifact("train.src")));
    auto tgt = tokenize_lines(read_lines(cfg.artifact("train.tgt")));
    corpus.insert(corpus.end(), tgt.begin(), tgt.end());
    auto model = subword::learn_bpe(corpus, cfg.bpe_merges);
    model.save(cfg.artifact("bpe.model"));
    std::cerr << "learn-bpe: merges=" << model.num_merges() << "\n";
}

void stage_count_freq(const RunConfig& cfg) {
    require_artifact(cfg.artifact("train.src"), "run the clean stage first");
    auto table = lexicon::count_frequencies(tokenize_lines(read_lines(cfg.artifact("train.src"))));
    table.save_tsv(cfg.artifact("freq.tsv"));
    std::cerr << "count-freq: tokens=" << table.total() << " types=" << table.distinct() << "\n";
}

void stage_ingest_dict(const RunConfig& cfg) {
    require_artifact(cfg.paths.dict, "paths.dict");
    dictparse::ParseStats stats;
    auto dict = dictparse::build_dictionary_from_file(cfg.paths.dict, &stats);
    dict.save_tsv(cfg.artifact("dict.tsv"));
    std::cerr << "lines=" << stats.lines_read << " skipped=" << stats.lines_skipped
              << " entries=" << stats.entries_kept << "\n";
}

lexicon::LemmaTable load_lemmas(const RunConfig& cfg) {
    if (cfg.paths.lemmas.empty()) return {};
    require_artifact(cfg.paths.lemmas, "paths.lemmas");
    return lexicon::LemmaTable::load_tsv(cfg.paths.lemmas);
}

// Augments one corpus side: annotation (masking mode only), BPE segmentation
// of source and definitions, serialization. Targets are BPE-segmented with
// the same dropout setting.
struct AugmentedFiles {
    std::vector<std::string> records;
    std::vector<std::string> targets;
    std::size_t overflowed = 0;
};

AugmentedFiles augment_pairs(const std::vector<SentencePair>& pairs, const RunConfig& cfg,
                             const subword::BpeModel& bpe, const lexicon::FreqTable& freq,
                             const dictparse::Dictionary& dict, const lexicon::LemmaTable& lemmas,
                             double dropout, subword::Rng& rng) {
    AugmentedFiles out;
    for (const auto& [src, tgt] : pairs) {
        auto words = subword::word_tokenize(src);
        std::vector<lexicon::Annotation> annotations;
        if (cfg.mode == "masking")
            annotations = lexicon::annotate_sentence(words, freq, dict, lemmas, cfg.policy,
                                                     lexicon::Mode::kTrain);
        auto built = augment::build_augmented(words, annotations, bpe, dropout, rng,
                                              static_cast<std::size_t>(cfg.model.max_len));
        if (built.augmentation_dropped) ++out.overflowed;
        out.records.push_back(augment::serialize_example(built.example));

        std::vector<std::string> tgt_pieces;
        for (const auto& w : subword::word_tokenize(tgt)) {
            auto pieces = subword::apply_bpe(bpe, w, dropout, rng);
            tgt_pieces.insert(tgt_pieces.end(), pieces.begin(), pieces.end());
        }
        out.targets.push_back(join(tgt_pieces, " "));
    }
    return out;
}

void stage_augment(const RunConfig& cfg) {
    require_artifact(cfg.artifact("train.src"), "run the clean stage first");
    require_artifact(cfg.artifact("train.tgt"), "run the clean stage first");
    require_artifact(cfg.artifact("bpe.model"), "run the learn-bpe stage first");
    auto bpe = subword::BpeModel::load(cfg.artifact("bpe.model"));

    lexicon::FreqTable freq;
    dictparse::Dictionary dict;
    lexicon::LemmaTable lemmas;
    if (cfg.mode == "masking") {
        require_artifact(cfg.artifact("freq.tsv"), "run the count-freq stage first");
        require_artifact(cfg.artifact("dict.tsv"), "run the ingest-dict stage first");
        freq = lexicon::FreqTable::load_tsv(cfg.artifact("freq.tsv"));
        dict = dictparse::Dictionary::load_tsv(cfg.artifact("dict.tsv"));
        lemmas = load_lemmas(cfg);
    } else if (cfg.mode == "parallel") {
        require_artifact(cfg.artifact("dict.tsv"), "run the ingest-dict stage first");
        dict = dictparse::Dictionary::load_tsv(cfg.artifact("dict.tsv"));
    }

    subword::Rng rng(cfg.seed);
    auto train_pairs = read_pair_files(cfg.artifact("train.src"), cfg.artifact("train.tgt"));
    if (cfg.mode == "parallel") {
        auto extra = dict_as_parallel(dict);
        train_pairs.insert(train_pairs.end(), extra.begin(), extra.end());
    }
    auto train = augment_pairs(train_pairs, cfg, bpe, freq, dict, lemmas, cfg.bpe_dropout, rng);
    write_lines(cfg.artifact("train.aug"), train.records);
    write_lines(cfg.artifact("train.tgt.bpe"), train.targets);
    std::cerr << "augment: train=" << train.records.size() << " overflowed=" << train.overflowed
              << "\n";

    if (file_exists(cfg.artifact("valid.src"))) {
        auto valid_pairs = read_pair_files(cfg.artifact("valid.src"), cfg.artifact("valid.tgt"));
        // Validation segmentation is deterministic: dropout 0.
        auto valid = augment_pairs(valid_pairs, cfg, bpe, freq, dict, lemmas, 0.0, rng);
        write_lines(cfg.artifact("valid.aug"), valid.records);
        write_lines(cfg.artifact("valid.tgt.bpe"), valid.targets);
    }
}

model::Vocab build_vocab(const RunConfig& cfg, const subword::BpeModel& bpe) {
    std::set<std::string> tokens;
    for (const auto& rec : read_lines(cfg.artifact("train.aug"))) {
        auto ex = augment::deserialize_example(rec);
        tokens.insert(ex.tokens.begin(), ex.tokens.end());
    }
    for (const auto& line : read_lines(cfg.artifact("train.tgt.bpe"))) {
        auto toks = split_ws(line);
        tokens.insert(toks.begin(), toks.end());
    }
    // Dropout-free segmentations of every training word, so deterministic
    // validation/inference splits never fall out of vocabulary.
    subword::Rng rng(0);
    std::set<std::string> words;
    for (const auto& line : read_lines(cfg.artifact("train.src"))) {
        auto ws = subword::word_tokenize(line);
        words.insert(ws.begin(), ws.end());
    }
    for (const auto& line : read_lines(cfg.artifact("train.tgt"))) {
        auto ws = subword::word_tokenize(line);
        words.insert(ws.begin(), ws.end());
    }
    for (const auto& w : words) {
        auto pieces = subword::apply_bpe(bpe, w, 0.0, rng);
        tokens.insert(pieces.begin(), pieces.end());
    }
    return model::Vocab(std::vector<std::string>(tokens.begin(), tokens.end()));
}

std::vector<model::TrainExample> load_examples(const std::string& aug_path,
                                               const std::string& tgt_path,
                                               const model::Vocab& vocab, int max_len,
                                               std::size_t* skipped) {
    auto records = read_lines(aug_path);
    auto targets = read_lines(tgt_path);
    if (records.size() != targets.size())
        throw FormatError("augmented/target files differ in length: " + aug_path);
    std::vector<model::TrainExample> examples;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto ex = augment::deserialize_example(records[i]);
        std::vector<int> tgt{model::Vocab::kBos};
        for (const auto& tok : split_ws(targets[i])) tgt.push_back(vocab.id(tok));
        tgt.push_back(model::Vocab::kEos);
        if (ex.tokens.size() > static_cast<std::size_t>(max_len) ||
            tgt.size() - 1 > static_cast<std::size_t>(max_len) || tgt.size() < 2) {
            if (skipped) ++*skipped;
            continue;
        }
        model::TrainExample te;
        te.enc.ids = vocab.encode(ex.tokens);
        te.enc.eos_index = ex.eos_index;
        te.enc.masks = augment::build_masks(ex);
        te.tgt = std::move(tgt);
        examples.push_back(std::move(te));
    }
    return examples;
}

void stage_train(const RunConfig& cfg) {
    require_artifact(cfg.artifact("train.aug"), "run the augment stage first");
    require_artifact(cfg.artifact("train.tgt.bpe"), "run the augment stage first");
    require_artifact(cfg.artifact("bpe.model"), "run the learn-bpe stage first");
    auto bpe = subword::BpeModel::load(cfg.artifact("bpe.model"));
    auto vocab = build_vocab(cfg, bpe);

    model::ModelConfig mc = cfg.model;
    mc.vocab_size = vocab.size();
    model::Model<float> net(mc, vocab, cfg.seed);

    std::size_t skipped = 0;
    auto train_set = load_examples(cfg.artifact("train.aug"), cfg.artifact("train.tgt.bpe"), vocab,
                                   mc.max_len, &skipped);
    std::vector<model::TrainExample> valid_set;
    if (file_exists(cfg.artifact("valid.aug")))
        valid_set = load_examples(cfg.artifact("valid.aug"), cfg.artifact("valid.tgt.bpe"), vocab,
                                  mc.max_len, &skipped);
    std::cerr << "train: examples=" << train_set.size() << " valid=" << valid_set.size()
              << " skipped=" << skipped << " vocab=" << vocab.size() << "\n";

    // Distinct stream from model initialization.
    std::uint64_t train_seed = cfg.seed * 0x9E3779B97F4A7C15ull + 1;
    auto result = model::train(net, train_set, valid_set, cfg.schedule, train_seed,
                               cfg.artifact("checkpoint.bin"), &std::cerr);
    write_lines(cfg.artifact("training.log"), result.log_lines);
}

Translator make_translator(const RunConfig& cfg) {
    require_artifact(cfg.artifact("checkpoint.bin"), "run the train stage first");
    require_artifact(cfg.artifact("bpe.model"), "run the learn-bpe stage first");
    auto checkpoint = model::load_checkpoint(cfg.artifact("checkpoint.bin"));
    auto bpe = subword::BpeModel::load(cfg.artifact("bpe.model"));

    lexicon::FreqTable freq;
    dictparse::Dictionary dict;
    lexicon::LemmaTable lemmas;
    if (cfg.mode == "masking") {
        require_artifact(cfg.artifact("freq.tsv"), "run the count-freq stage first");
        require_artifact(cfg.artifact("dict.tsv"), "run the ingest-dict stage first");
        freq = lexicon::FreqTable::load_tsv(cfg.artifact("freq.tsv"));
        dict = dictparse::Dictionary::load_tsv(cfg.artifact("dict.tsv"));
        lemmas = load_lemmas(cfg);
    }
    return Translator(std::move(checkpoint), std::move(bpe), std::move(dict), std::move(lemmas),
                      std::move(freq), cfg.policy, cfg.mode, cfg.beam, cfg.ablate_masks);
}

void stage_translate(const RunConfig& cfg) {
    if (cfg.translate_input.empty()) throw ConfigError("translate.input is not set");
    require_artifact(cfg.translate_input, "translate.input");
    auto translator = make_translator(cfg);
    std::vector<std::string> hyps;
    for (const auto& line : read_lines(cfg.translate_input))
        hyps.push_back(translator.translate_line(line));
    std::string out_path =
        cfg.translate_output.empty() ? cfg.artifact("hyps.txt") : cfg.translate_output;
    write_lines(out_path, hyps);
    std::cerr << "translate: sentences=" << hyps.size() << " -> " << out_path << "\n";
}

void stage_evaluate(const RunConfig& cfg) {
    if (cfg.eval_hyp.empty() || cfg.eval_ref.empty())
        throw ConfigError("evaluate.hyp and evaluate.ref must be set");
    require_artifact(cfg.eval_hyp, "evaluate.hyp");
    require_artifact(cfg.eval_ref, "evaluate.ref");
    auto report = evalmetrics::evaluate(read_lines(cfg.eval_hyp), read_lines(cfg.eval_ref));
    std::cout << report.to_string() << "\n";
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += "\"\"";
        else quoted += c;
    }
    return quoted + "\"";
}

void stage_heatmap(const RunConfig& cfg) {
    if (cfg.heatmap_sentence.empty()) throw ConfigError("heatmap.sentence is not set");
    auto translator = make_translator(cfg);
    auto heat = translator.heatmap_for(cfg.heatmap_sentence);

    std::vector<std::string> lines;
    std::string header;
    for (const auto& l : heat.labels) header += "," + csv_quote(l);
    lines.push_back(header);
    for (Eigen::Index i = 0; i < heat.scores.rows(); ++i) {
        std::ostringstream row;
        row << csv_quote(heat.labels[static_cast<std::size_t>(i)]);
        row.precision(6);
        for (Eigen::Index j = 0; j < heat.scores.cols(); ++j) row << ',' << heat.scores(i, j);
        lines.push_back(row.str());
    }
    std::string out_path =
        cfg.heatmap_output.empty() ? cfg.artifact("heatmap.csv") : cfg.heatmap_output;
    write_lines(out_path, lines);
    std::cerr << "heatmap: " << heat.labels.size() << "x" << heat.labels.size() << " -> "
              << out_path << "\n";
}

}  // namespace

void run_stage(const RunConfig& cfg, const std::string& stage) {
    std::filesystem::create_directories(cfg.work_dir);
    if (stage == "clean") stage_clean(cfg);
    else if (stage == "learn-bpe") stage_learn_bpe(cfg);
    else if (stage == "count-freq") stage_count_freq(cfg);
    else if (stage == "ingest-dict") stage_ingest_dict(cfg);
    else if (stage == "augment") stage_augment(cfg);
    else if (stage == "train") stage_train(cfg);
    else if (stage == "translate") stage_translate(cfg);
    else if (stage == "evaluate") stage_evaluate(cfg);
    else if (stage == "heatmap") stage_heatmap(cfg);
    else throw ConfigError("unknown stage: " + stage);
}

int run_stage_exit(const RunConfig& cfg, const std::string& stage) {
    try {
        run_stage(cfg, stage);
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const MissingArtifact& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return kExitMissingArtifact;
    } catch (const IoFailure& e) {
        std::cerr << "io failure: " << e.what() << "\n";
        return kExitIoFailure;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitFormatError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
}

Translator::Translator(model::LoadedCheckpoint checkpoint, subword::BpeModel bpe,
                       dictparse::Dictionary dict, lexicon::LemmaTable lemmas,
                       lexicon::FreqTable freq, lexicon::RareWordPolicy policy, std::string mode,
                       int beam_size, bool ablate_masks)
    : checkpoint_(std::move(checkpoint)),
      bpe_(std::move(bpe)),
      dict_(std::move(dict)),
      lemmas_(std::move(lemmas)),
      freq_(std::move(freq)),
      policy_(policy),
      mode_(std::move(mode)),
      beam_size_(beam_size) {
    checkpoint_.model->set_ablate_masks(ablate_masks);
}

augment::AugmentedExample Translator::prepare_example(const std::string& raw) {
    auto& net = *checkpoint_.model;
    auto words = subword::word_tokenize(subword::normalize_punct(raw));
    std::vector<lexicon::Annotation> annotations;
    if (mode_ == "masking")
        annotations = lexicon::annotate_sentence(words, freq_, dict_, lemmas_, policy_,
                                                 lexicon::Mode::kInfer);
    subword::Rng rng(0);  // dropout 0: never consulted
    auto built = augment::build_augmented(words, annotations, bpe_, 0.0, rng,
                                          static_cast<std::size_t>(net.config().max_len));
    augment::AugmentedExample ex = std::move(built.example);
    if (ex.tokens.size() > static_cast<std::size_t>(net.config().max_len)) {
        // Over-long bare source: keep a prefix and the EOS.
        ex.tokens.resize(static_cast<std::size_t>(net.config().max_len) - 1);
        ex.tokens.push_back(augment::kEosToken);
        ex.eos_index = ex.tokens.size() - 1;
        ex.links.clear();
    }
    return ex;
}

model::Heatmap<float> Translator::heatmap_for(const std::string& raw) {
    if (subword::word_tokenize(subword::normalize_punct(raw)).empty())
        throw ConfigError("heatmap needs a non-empty sentence");
    auto ex = prepare_example(raw);
    return model::attention_heatmap(*checkpoint_.model, ex);
}

std::string Translator::translate_line(const std::string& raw) {
    auto& net = *checkpoint_.model;
    if (subword::word_tokenize(subword::normalize_punct(raw)).empty()) return "";
    auto ex = prepare_example(raw);

    typename model::Model<float>::EncInput input{net.vocab().encode(ex.tokens),
                                                 augment::build_masks(ex), ex.eos_index};
    int max_steps = std::min(net.config().max_len - 1,
                             static_cast<int>(2 * ex.tokens.size()) + 10);
    auto ids = model::beam_search(net, input, beam_size_, max_steps);
    auto tokens = net.vocab().decode(ids);
    // A model can end its output on a marked piece; treat it as final.
    if (!tokens.empty() && subword::has_marker(tokens.back()))
        tokens.back().resize(tokens.back().size() - 2);
    return join(subword::unbpe(tokens), " ");
}

}  // namespace nmt::pipeline
