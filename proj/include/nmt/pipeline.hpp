#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nmt/checkpoint.hpp"
#include "nmt/dictparse.hpp"
#include "nmt/lexicon.hpp"
#include "nmt/subword.hpp"
#include "nmt/train.hpp"

namespace nmt::pipeline {

struct CleanPolicy {
    std::size_t max_len = 256;   // word tokens, counted before BPE
    double max_ratio = 1.3;
    bool one_sided_ratio = false;  // literal source:target reading, off by default
    bool drop_empty = true;
    bool drop_duplicates = true;
};

struct CleanStats {
    std::size_t read = 0;
    std::size_t kept = 0;
    std::size_t dropped_empty = 0;
    std::size_t dropped_duplicate = 0;
    std::size_t dropped_length = 0;
    std::size_t dropped_ratio = 0;
};

using SentencePair = std::pair<std::string, std::string>;

/// Normalizes punctuation on both sides, then applies, in order: drop empty,
/// drop exact duplicates (first kept), drop over-long sides, drop ratio
/// violations. Idempotent: cleaning a cleaned corpus drops nothing.
std::vector<SentencePair> clean_corpus(const std::vector<SentencePair>& pairs,
                                       const CleanPolicy& policy, CleanStats* stats = nullptr);

/// One (headword, sense) pair per definition, in dictionary order; appended
/// to the training corpus in "parallel" mode.
std::vector<SentencePair> dict_as_parallel(const dictparse::Dictionary& dict);

struct RunConfig {
    std::uint64_t seed = 1;
    std::string mode = "masking";  // baseline | parallel | masking
    std::string work_dir = "work";

    struct Paths {
        std::string train_src, train_tgt;
        std::string valid_src, valid_tgt;
        std::string dict;    // raw dictionary file
        std::string lemmas;  // optional TSV
    } paths;

    CleanPolicy clean;
    std::size_t bpe_merges = 8000;
    double bpe_dropout = 0.1;
    lexicon::RareWordPolicy policy;
    model::ModelConfig model;
    model::TrainSchedule schedule;

    int beam = 4;
    bool ablate_masks = false;  // zero both dictionary masks at inference
    std::string translate_input, translate_output;
    std::string eval_hyp, eval_ref;
    std::string heatmap_sentence, heatmap_output;

    std::string artifact(const std::string& name) const { return work_dir + "/" + name; }
};

/// Flat "section.key" -> value view of a config file. '#' starts a comment;
/// "[section]" lines scope the keys that follow.
std::map<std::string, std::string> parse_config_text(const std::vector<std::string>& lines);

/// Loads a config file, applies "--override section.key=value" pairs, then
/// the NMT_SEED environment variable if present.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
RunConfig config_from_map(const std::map<std::string, std::string>& map);

/// Runs one stage: clean, learn-bpe, count-freq, ingest-dict, augment,
/// train, translate, evaluate, heatmap. Throws ConfigError, MissingArtifact,
/// IoFailure or FormatError; the exit-code wrapper below maps them.
void run_stage(const RunConfig& config, const std::string& stage);

/// Exception-to-exit-code wrapper used by the CLI (diagnostics to stderr).
int run_stage_exit(const RunConfig& config, const std::string& stage);

/// End-to-end translation around a trained checkpoint. In masking mode rare
/// words are annotated with the inference threshold and definitions appended
/// before encoding; baseline/parallel modes translate the bare sentence.
class Translator {
public:
    Translator(model::LoadedCheckpoint checkpoint, subword::BpeModel bpe,
               dictparse::Dictionary dict, lexicon::LemmaTable lemmas, lexicon::FreqTable freq,
               lexicon::RareWordPolicy policy, std::string mode, int beam_size,
               bool ablate_masks = false);

    std::string translate_line(const std::string& raw);

    /// Summed encoder attention over a raw sentence (annotated the same way
    /// translate_line would see it).
    model::Heatmap<float> heatmap_for(const std::string& raw);

    model::Model<float>& model() { return *checkpoint_.model; }

private:
    augment::AugmentedExample prepare_example(const std::string& raw);

    model::LoadedCheckpoint checkpoint_;
    subword::BpeModel bpe_;
    dictparse::Dictionary dict_;
    lexicon::LemmaTable lemmas_;
    lexicon::FreqTable freq_;
    lexicon::RareWordPolicy policy_;
    std::string mode_;
    int beam_size_;
};

}  // namespace nmt::pipeline
