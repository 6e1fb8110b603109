#include "vpl/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "vpl/common.hpp"

namespace vpl {

void sgd_step(ParamStore& params, double lr) {
    if (lr <= 0.0) throw std::invalid_argument("sgd: learning rate must be positive");
    for (auto& [name, p] : params.items()) {
        if (!p.trainable) continue;
        ensure_finite(p.grad.data, ("gradient of " + name).c_str());
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            p.value.data[i] -= lr * p.grad.data[i];
        }
    }
}

Adam::Adam(AdamConfig config) : config_(config) {
    if (config_.lr <= 0.0) throw std::invalid_argument("adam: learning rate must be positive");
    if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 || config_.beta2 >= 1.0) {
        throw std::invalid_argument("adam: betas must lie in [0, 1)");
    }
    if (config_.eps <= 0.0) throw std::invalid_argument("adam: eps must be positive");
}

void Adam::step(ParamStore& params) {
    ++t_;
    double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : params.items()) {
        if (!p.trainable) continue;
        ensure_finite(p.grad.data, ("gradient of " + name).c_str());
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            double g = p.grad.data[i];
            double m = config_.beta1 * p.adam_m.data[i] + (1.0 - config_.beta1) * g;
            double v = config_.beta2 * p.adam_v.data[i] + (1.0 - config_.beta2) * g * g;
            p.adam_m.data[i] = m;
            p.adam_v.data[i] = v;
            double m_hat = m / bc1;
            double v_hat = v / bc2;
            p.value.data[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
        ensure_finite(p.value.data, ("updated value of " + name).c_str());
    }
}

}  // namespace vpl
