#pragma once

#include <cstdint>

#include "chronoqa/params.hpp"

namespace chronoqa {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adaptive-moment optimizer with bias correction. Moment accumulators live on
// the parameters themselves; the optimizer holds the hyperparameters and the
// shared step counter.
class AdamOptimizer {
public:
    explicit AdamOptimizer(AdamConfig config = {}) : config_(config) {}

    // Applies one update from the gradients accumulated in `store`.
    // Frozen (non-trainable) parameters are left untouched, moments included.
    // Throws TrainingError if any gradient is non-finite.
    void step(ParamStore& store);

    int64_t step_count() const { return step_; }
    const AdamConfig& config() const { return config_; }
    // Schedules adjust the rate between steps; moments are unaffected.
    void set_learning_rate(double lr) { config_.learning_rate = lr; }

private:
    AdamConfig config_;
    int64_t step_ = 0;
};

}  // namespace chronoqa
