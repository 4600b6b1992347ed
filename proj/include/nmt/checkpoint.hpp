#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "nmt/transformer.hpp"

namespace nmt::model {

/// Optimizer/schedule progress carried inside the checkpoint so training can
/// resume and tests can inspect the best validation loss.
struct TrainState {
    int epoch = 0;
    double best_valid_loss = 0.0;
    double lr = 0.0;
};

/// Binary container: magic + version, a JSON manifest (config, vocabulary,
/// training state), then named raw little-endian float32 tensors. Parameter
/// save -> load round trips are bit-exact.
void save_checkpoint(const std::string& path, Model<float>& model, const TrainState& state);

struct LoadedCheckpoint {
    std::unique_ptr<Model<float>> model;
    TrainState state;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace nmt::model
