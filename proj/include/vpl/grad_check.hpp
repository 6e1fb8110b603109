#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "vpl/params.hpp"

namespace vpl {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Central-difference verification of the gradients currently stored in
// `params`. `loss` must be a pure forward pass (no gradient writes, no state).
// Coordinates beyond max_coords_per_param are subsampled with a seeded stream.
// Relative error per coordinate is |a - n| / max(1, |a|, |n|).
GradCheckResult grad_check(const std::function<double()>& loss, ParamStore& params, double eps,
                           std::size_t max_coords_per_param = static_cast<std::size_t>(-1),
                           std::uint64_t seed = 0);

}  // namespace vpl
