#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace vpl {

// Dense row-major container of 64-bit reals. Rank 1 and 2 cover every layer in
// this codebase.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> dims) {
        Tensor t;
        std::size_t total = 1;
        for (std::size_t d : dims) {
            if (d == 0) throw std::invalid_argument("tensor dims must be positive");
            total *= d;
        }
        t.shape = std::move(dims);
        t.data.assign(total, 0.0);
        return t;
    }

    static Tensor vec(std::initializer_list<double> values) {
        Tensor t;
        t.shape = {values.size()};
        t.data.assign(values);
        return t;
    }

    static Tensor from_data(std::vector<std::size_t> dims, std::vector<double> values) {
        Tensor t = zeros(std::move(dims));
        if (values.size() != t.data.size()) {
            throw std::invalid_argument("tensor data length does not match shape product");
        }
        t.data = std::move(values);
        return t;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    std::size_t dim(std::size_t i) const {
        if (i >= shape.size()) throw std::invalid_argument("tensor dim index out of range");
        return shape[i];
    }

    double& at(std::size_t i) { return data.at(i); }
    double at(std::size_t i) const { return data.at(i); }

    double& at(std::size_t i, std::size_t j) {
        if (rank() != 2) throw std::invalid_argument("2-index access on non-matrix tensor");
        return data.at(i * shape[1] + j);
    }
    double at(std::size_t i, std::size_t j) const {
        if (rank() != 2) throw std::invalid_argument("2-index access on non-matrix tensor");
        return data.at(i * shape[1] + j);
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += " x ";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

}  // namespace vpl
