#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "nmt/checkpoint.hpp"
#include "nmt/transformer.hpp"

namespace nmt::model {

struct TrainSchedule {
    double init_lr = 3e-4;
    double decay_factor = 0.8;
    int patience = 3;
    double min_lr = 5e-5;
    int early_stop = 20;  // epochs without improvement
    int max_epochs = 250;
    int batch_tokens = 4096;
};

/// Reduce-on-plateau state machine: a strictly better validation loss resets
/// the bad-epoch counter; once more than `patience` consecutive bad epochs
/// accumulate, the rate decays (floored at min_lr) and the counter resets.
class PlateauScheduler {
public:
    explicit PlateauScheduler(const TrainSchedule& sched)
        : sched_(sched), lr_(sched.init_lr) {}

    /// Observes one epoch's validation loss; returns true on improvement.
    bool observe(double valid_loss) {
        if (valid_loss < best_) {
            best_ = valid_loss;
            bad_epochs_ = 0;
            epochs_since_best_ = 0;
            return true;
        }
        ++bad_epochs_;
        ++epochs_since_best_;
        if (bad_epochs_ > sched_.patience) {
            lr_ = std::max(lr_ * sched_.decay_factor, sched_.min_lr);
            bad_epochs_ = 0;
        }
        return false;
    }

    double lr() const { return lr_; }
    double best() const { return best_; }
    bool should_stop() const { return epochs_since_best_ >= sched_.early_stop; }
    int epochs_since_best() const { return epochs_since_best_; }

private:
    TrainSchedule sched_;
    double lr_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_epochs_ = 0;
    int epochs_since_best_ = 0;
};

template <typename S>
class AdamOptimizer {
public:
    AdamOptimizer(double beta1 = 0.9, double beta2 = 0.98, double eps = 1e-9)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<autodiff::Parameter<S>*>& params, double lr) {
        ++t_;
        const S b1 = static_cast<S>(beta1_), b2 = static_cast<S>(beta2_);
        const S corr1 = static_cast<S>(1.0 - std::pow(beta1_, t_));
        const S corr2 = static_cast<S>(1.0 - std::pow(beta2_, t_));
        for (auto* p : params) {
            p->adam_m = b1 * p->adam_m + (S(1) - b1) * p->grad;
            p->adam_v = b2 * p->adam_v + (S(1) - b2) * p->grad.cwiseProduct(p->grad);
            auto m_hat = p->adam_m / corr1;
            auto v_hat = p->adam_v / corr2;
            p->value -= static_cast<S>(lr) *
                        (m_hat.array() / (v_hat.array().sqrt() + static_cast<S>(eps_))).matrix();
            p->zero_grad();
        }
    }

private:
    double beta1_, beta2_, eps_;
    int t_ = 0;
};

struct TrainExample {
    Model<float>::EncInput enc;
    std::vector<int> tgt;  // <bos> tokens... <eos>
};

struct TrainResult {
    TrainState best_state;
    std::vector<std::string> log_lines;  // one per epoch
    int epochs_run = 0;
};

/// Token-budget batches over length-sorted examples, Adam updates, plateau
/// decay and early stopping on validation loss; the best-validation model is
/// written to `checkpoint_path` whenever it improves. Deterministic given the
/// seed.
TrainResult train(Model<float>& model, const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& valid_set, const TrainSchedule& sched,
                  std::uint64_t seed, const std::string& checkpoint_path,
                  std::ostream* progress = nullptr);

/// Token-mean validation loss in eval mode.
double evaluate_loss(Model<float>& model, const std::vector<TrainExample>& examples);

}  // namespace nmt::model
