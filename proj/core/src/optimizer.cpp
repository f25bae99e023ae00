#include "chronoqa/optimizer.hpp"

#include <cmath>

#include "chronoqa/errors.hpp"

namespace chronoqa {

void AdamOptimizer::step(ParamStore& store) {
    for (size_t i = 0; i < store.size(); ++i) {
        Param& p = store[i];
        if (!p.trainable) continue;
        if (!p.grad.all_finite()) {
            throw TrainingError("optimizer: non-finite gradient in parameter '" + p.name + "'");
        }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (size_t i = 0; i < store.size(); ++i) {
        Param& p = store[i];
        if (!p.trainable) continue;
        for (size_t k = 0; k < p.value.size(); ++k) {
            const double g = p.grad[k];
            p.moment1[k] = config_.beta1 * p.moment1[k] + (1.0 - config_.beta1) * g;
            p.moment2[k] = config_.beta2 * p.moment2[k] + (1.0 - config_.beta2) * g * g;
            const double m_hat = p.moment1[k] / bc1;
            const double v_hat = p.moment2[k] / bc2;
            p.value[k] -=
                config_.learning_rate * p.lr_scale * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

}  // namespace chronoqa
