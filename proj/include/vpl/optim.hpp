#pragma once

#include <cstdint>

#include "vpl/params.hpp"

namespace vpl {

// One vanilla gradient step over all trainable parameters, in name order.
void sgd_step(ParamStore& params, double lr);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig config);

    // Bias-corrected moment update, in name order, skipping frozen parameters.
    void step(ParamStore& params);

    std::int64_t steps_taken() const { return t_; }

private:
    AdamConfig config_;
    std::int64_t t_ = 0;
};

}  // namespace vpl
