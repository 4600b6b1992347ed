#include "nmt/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace nmt::model {

namespace {

std::size_t example_tokens(const TrainExample& ex) {
    return ex.enc.ids.size() + ex.tgt.size();
}

// Length-sorted token-budget batching; batch order is reshuffled per epoch.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<TrainExample>& examples,
                                                   int batch_tokens) {
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return example_tokens(examples[a]) < example_tokens(examples[b]);
    });
    std::vector<std::vector<std::size_t>> batches;
    std::vector<std::size_t> current;
    std::size_t current_tokens = 0;
    for (std::size_t idx : order) {
        std::size_t t = example_tokens(examples[idx]);
        if (!current.empty() && current_tokens + t > static_cast<std::size_t>(batch_tokens)) {
            batches.push_back(std::move(current));
            current.clear();
            current_tokens = 0;
        }
        current.push_back(idx);
        current_tokens += t;
    }
    if (!current.empty()) batches.push_back(std::move(current));
    return batches;
}

std::string format_log_line(int epoch, double train_loss, double valid_loss, double lr) {
    std::ostringstream os;
    os.precision(9);
    os << std::fixed << "epoch=" << epoch << " train_loss=" << train_loss
       << " valid_loss=" << valid_loss << " lr=" << lr;
    return os.str();
}

}  // namespace

double evaluate_loss(Model<float>& model, const std::vector<TrainExample>& examples) {
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& ex : examples) {
        std::size_t n = ex.tgt.size() - 1;
        total += static_cast<double>(model.loss_value(ex.enc, ex.tgt)) * static_cast<double>(n);
        tokens += n;
    }
    return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

TrainResult train(Model<float>& model, const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& valid_set, const TrainSchedule& sched,
                  std::uint64_t seed, const std::string& checkpoint_path,
                  std::ostream* progress) {
    if (train_set.empty()) throw ConfigError("empty training set");

    auto params = model.parameters();
    AdamOptimizer<float> adam;
    PlateauScheduler scheduler(sched);
    Rng rng(seed);
    auto batches = make_batches(train_set, sched.batch_tokens);

    TrainResult result;
    for (int epoch = 1; epoch <= sched.max_epochs; ++epoch) {
        const double lr = scheduler.lr();
        std::shuffle(batches.begin(), batches.end(), rng);

        double epoch_loss = 0.0;
        std::size_t epoch_tokens = 0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto& batch = batches[b];
            std::size_t batch_gold = 0;
            for (std::size_t idx : batch) batch_gold += train_set[idx].tgt.size() - 1;

            for (std::size_t idx : batch) {
                const auto& ex = train_set[idx];
                autodiff::Graph<float> g;
                auto built = model.build_loss(g, ex.enc, ex.tgt, /*train=*/true, rng);
                float loss = g.value(built.loss_node)(0, 0);
                if (!std::isfinite(loss)) {
                    throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) +
                                        " batch " + std::to_string(b));
                }
                // Weight each sentence so the batch gradient is the mean over
                // all gold tokens in the batch.
                float weight = static_cast<float>(built.n_tokens) / static_cast<float>(batch_gold);
                g.backward(built.loss_node, weight);
                epoch_loss += static_cast<double>(loss) * built.n_tokens;
                epoch_tokens += static_cast<std::size_t>(built.n_tokens);
            }
            adam.step(params, lr);
        }

        double train_loss = epoch_loss / static_cast<double>(epoch_tokens);
        double valid_loss = valid_set.empty() ? train_loss : evaluate_loss(model, valid_set);

        result.log_lines.push_back(format_log_line(epoch, train_loss, valid_loss, lr));
        if (progress) *progress << result.log_lines.back() << '\n';
        result.epochs_run = epoch;

        bool improved = scheduler.observe(valid_loss);
        if (improved) {
            result.best_state = TrainState{epoch, scheduler.best(), scheduler.lr()};
            if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, model, result.best_state);
        }
        if (scheduler.should_stop()) break;
    }
    return result;
}

}  // namespace nmt::model
