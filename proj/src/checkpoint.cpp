#include "nmt/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "nmt/common.hpp"

namespace nmt::model {

namespace {

constexpr char kMagic[8] = {'N', 'M', 'T', 'C', 'K', 'P', 'T', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"d_model", c.d_model},
            {"d_ffn", c.d_ffn},
            {"layers", c.layers},
            {"heads", c.heads},
            {"dropout_p", c.dropout_p},
            {"label_smoothing", c.label_smoothing},
            {"vocab_size", c.vocab_size},
            {"max_len", c.max_len},
            {"mask_definitions_in_cross_attention", c.mask_definitions_in_cross_attention}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.d_model = j.at("d_model");
    c.d_ffn = j.at("d_ffn");
    c.layers = j.at("layers");
    c.heads = j.at("heads");
    c.dropout_p = j.at("dropout_p");
    c.label_smoothing = j.at("label_smoothing");
    c.vocab_size = j.at("vocab_size");
    c.max_len = j.at("max_len");
    c.mask_definitions_in_cross_attention = j.at("mask_definitions_in_cross_attention");
    return c;
}

}  // namespace

void save_checkpoint(const std::string& path, Model<float>& model, const TrainState& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot write checkpoint: " + path);

    nlohmann::json manifest;
    manifest["format"] = 1;
    manifest["config"] = config_to_json(model.config());
    manifest["vocab"] = model.vocab().tokens();
    manifest["state"] = {{"epoch", state.epoch},
                         {"best_valid_loss", state.best_valid_loss},
                         {"lr", state.lr}};
    std::string text = manifest.dump();

    out.write(kMagic, 8);
    write_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));

    auto params = model.parameters();
    write_u32(out, static_cast<std::uint32_t>(params.size()));
    for (auto* p : params) {
        write_u32(out, static_cast<std::uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_u32(out, static_cast<std::uint32_t>(p->value.rows()));
        write_u32(out, static_cast<std::uint32_t>(p->value.cols()));
        // Row-major float32, little-endian on every platform we target.
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(p->value.size())));
    }
    if (!out) throw IoFailure("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot read checkpoint: " + path);

    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != std::string(kMagic, 8))
        throw FormatError("not a checkpoint file: " + path);

    std::uint32_t manifest_len = read_u32(in);
    std::string text(manifest_len, '\0');
    in.read(text.data(), manifest_len);
    if (!in) throw FormatError("truncated checkpoint manifest: " + path);

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad checkpoint manifest: " + std::string(e.what()));
    }
    ModelConfig cfg = config_from_json(manifest.at("config"));
    std::vector<std::string> vocab_tokens = manifest.at("vocab");
    Vocab vocab(vocab_tokens);
    if (vocab.size() != cfg.vocab_size)
        throw FormatError("checkpoint vocab size does not match its config");

    LoadedCheckpoint loaded;
    loaded.model = std::make_unique<Model<float>>(cfg, vocab, /*seed=*/0);
    loaded.state.epoch = manifest.at("state").at("epoch");
    loaded.state.best_valid_loss = manifest.at("state").at("best_valid_loss");
    loaded.state.lr = manifest.at("state").at("lr");

    std::uint32_t count = read_u32(in);
    auto params = loaded.model->parameters();
    if (count != params.size()) throw FormatError("checkpoint tensor count mismatch");
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        std::uint32_t rows = read_u32(in);
        std::uint32_t cols = read_u32(in);
        auto* p = loaded.model->find_parameter(name);
        if (!p) throw FormatError("unknown tensor in checkpoint: " + name);
        if (p->value.rows() != static_cast<Eigen::Index>(rows) ||
            p->value.cols() != static_cast<Eigen::Index>(cols))
            throw FormatError("tensor shape mismatch for " + name);
        in.read(reinterpret_cast<char*>(p->value.data()),
                static_cast<std::streamsize>(sizeof(float) * rows * cols));
        if (!in) throw FormatError("truncated tensor data: " + name);
    }
    return loaded;
}

}  // namespace nmt::model
