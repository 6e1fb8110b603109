#include "vpl/params.hpp"

#include <stdexcept>

#include "vpl/common.hpp"

namespace vpl {

namespace {
constexpr char kMagic[4] = {'V', 'P', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

Param& ParamStore::create(const std::string& name, Tensor init, bool trainable) {
    if (name.empty()) throw std::invalid_argument("parameter name must be non-empty");
    if (params_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    ensure_finite(init.data, "parameter init");
    Param p;
    p.grad = Tensor::zeros(init.shape);
    p.adam_m = Tensor::zeros(init.shape);
    p.adam_v = Tensor::zeros(init.shape);
    p.value = std::move(init);
    p.trainable = trainable;
    return params_.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& [name, p] : params_) {
        std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
    }
}

void ParamStore::scale_grad(double factor) {
    for (auto& [name, p] : params_) {
        for (double& g : p.grad.data) g *= factor;
    }
}

std::string ParamStore::serialize() const {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(params_.size()));
    for (const auto& [name, p] : params_) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.append(name);
        put_u32(out, static_cast<std::uint32_t>(p.value.shape.size()));
        for (std::size_t d : p.value.shape) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : p.value.data) put_f64(out, v);
    }
    return out;
}

ParamStore ParamStore::deserialize(std::string_view bytes) {
    std::size_t pos = 0;
    if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
        throw DataError("checkpoint: bad magic, expected VPNN");
    }
    pos = 4;
    std::uint32_t version = get_u32(bytes, pos);
    if (version != kVersion) {
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }
    std::uint32_t count = get_u32(bytes, pos);
    ParamStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = get_u32(bytes, pos);
        if (pos + name_len > bytes.size()) throw DataError("checkpoint: truncated name");
        std::string name(bytes.substr(pos, name_len));
        pos += name_len;
        std::uint32_t rank = get_u32(bytes, pos);
        std::vector<std::size_t> shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d) shape[d] = get_u32(bytes, pos);
        Tensor value = Tensor::zeros(shape);
        for (double& v : value.data) v = get_f64(bytes, pos);
        ensure_finite(value.data, ("checkpoint parameter " + name).c_str());
        store.create(name, std::move(value));
    }
    if (pos != bytes.size()) throw DataError("checkpoint: trailing bytes after last parameter");
    return store;
}

void ParamStore::load_values(const ParamStore& source) {
    if (source.params_.size() != params_.size()) {
        throw DataError("checkpoint mismatch: expected " + std::to_string(params_.size()) +
                        " parameters, got " + std::to_string(source.params_.size()));
    }
    for (auto& [name, p] : params_) {
        auto it = source.params_.find(name);
        if (it == source.params_.end()) {
            throw DataError("checkpoint mismatch: missing parameter " + name);
        }
        if (it->second.value.shape != p.value.shape) {
            throw DataError("checkpoint mismatch: parameter " + name + " has shape " +
                            it->second.value.shape_str() + ", expected " + p.value.shape_str());
        }
        p.value.data = it->second.value.data;
    }
}

void save_params(const ParamStore& store, const std::string& path) {
    write_file(path, store.serialize());
}

ParamStore load_params(const std::string& path) {
    return ParamStore::deserialize(read_file(path));
}

}  // namespace vpl
