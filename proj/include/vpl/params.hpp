#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "vpl/tensor.hpp"

namespace vpl {

// One named parameter with its gradient buffer and optimizer state. Shapes of
// all four tensors always agree.
struct Param {
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
    bool trainable = true;
};

class ParamStore {
public:
    // Iteration is name-ordered, which fixes the optimizer update order.
    using Map = std::map<std::string, Param>;

    Param& create(const std::string& name, Tensor init, bool trainable = true);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) != 0; }

    void zero_grad();
    void scale_grad(double factor);

    Map& items() { return params_; }
    const Map& items() const { return params_; }
    std::size_t size() const { return params_.size(); }

    // Checkpoint payload: values only, name-sorted, magic "VPNN".
    std::string serialize() const;
    static ParamStore deserialize(std::string_view bytes);

    // Copies values from `source` into existing parameters. Every name and
    // shape must match exactly in both directions.
    void load_values(const ParamStore& source);

private:
    Map params_;
};

void save_params(const ParamStore& store, const std::string& path);
ParamStore load_params(const std::string& path);

}  // namespace vpl
