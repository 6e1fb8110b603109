#include "vpl/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "vpl/common.hpp"
#include "vpl/rng.hpp"

namespace vpl {

GradCheckResult grad_check(const std::function<double()>& loss, ParamStore& params, double eps,
                           std::size_t max_coords_per_param, std::uint64_t seed) {
    if (eps == 0.0) throw std::invalid_argument("grad_check: eps must be nonzero");
    double base = loss();
    double base_again = loss();
    if (base != base_again) {
        throw NumericError("grad_check: forward pass is not deterministic (" +
                           std::to_string(base) + " vs " + std::to_string(base_again) + ")");
    }
    ensure_finite(base, "grad_check base loss");

    GradCheckResult result;
    for (auto& [name, p] : params.items()) {
        if (!p.trainable) continue;
        std::vector<std::size_t> coords;
        if (p.value.size() <= max_coords_per_param) {
            coords.resize(p.value.size());
            for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        } else {
            Rng rng(derive_seed(seed, name));
            coords.reserve(max_coords_per_param);
            for (std::size_t i = 0; i < max_coords_per_param; ++i) {
                coords.push_back(static_cast<std::size_t>(rng.uniform_index(p.value.size())));
            }
            std::sort(coords.begin(), coords.end());
            coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
        }
        for (std::size_t idx : coords) {
            double saved = p.value.data[idx];
            p.value.data[idx] = saved + eps;
            double plus = loss();
            p.value.data[idx] = saved - eps;
            double minus = loss();
            p.value.data[idx] = saved;
            double numeric = (plus - minus) / (2.0 * eps);
            double analytic = p.grad.data[idx];
            double rel = std::abs(analytic - numeric) /
                         std::max({1.0, std::abs(analytic), std::abs(numeric)});
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_param = name;
                result.worst_index = idx;
                result.analytic = analytic;
                result.numeric = numeric;
            }
        }
    }
    return result;
}

}  // namespace vpl
