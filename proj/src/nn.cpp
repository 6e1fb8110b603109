#include "vpl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vpl/common.hpp"

namespace vpl {

namespace {

void check_finite(const Tensor& t, const char* what) { ensure_finite(t.data, what); }

}  // namespace

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 1 || w.rank() != 2 || b.rank() != 1 || w.dim(1) != x.dim(0) ||
        w.dim(0) != b.dim(0)) {
        throw std::invalid_argument("affine shape mismatch: x " + x.shape_str() + ", W " +
                                    w.shape_str() + ", b " + b.shape_str());
    }
    check_finite(x, "affine input");
    check_finite(w, "affine weight");
    check_finite(b, "affine bias");
    std::size_t p = w.dim(0), m = w.dim(1);
    Tensor y = Tensor::zeros({p});
    for (std::size_t i = 0; i < p; ++i) {
        double acc = b.data[i];
        const double* row = w.data.data() + i * m;
        for (std::size_t j = 0; j < m; ++j) acc += row[j] * x.data[j];
        y.data[i] = acc;
    }
    check_finite(y, "affine output");
    return y;
}

void affine_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor* dw,
                     Tensor* db) {
    if (dy.rank() != 1 || dy.dim(0) != w.dim(0)) {
        throw std::invalid_argument("affine backward shape mismatch: dy " + dy.shape_str() +
                                    ", W " + w.shape_str());
    }
    std::size_t p = w.dim(0), m = w.dim(1);
    if (dx) {
        if (dx->size() != m) throw std::invalid_argument("affine backward: dx size mismatch");
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < p; ++i) acc += w.data[i * m + j] * dy.data[i];
            dx->data[j] += acc;
        }
    }
    if (dw) {
        if (dw->size() != w.size()) throw std::invalid_argument("affine backward: dW size mismatch");
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = 0; j < m; ++j) dw->data[i * m + j] += dy.data[i] * x.data[j];
        }
    }
    if (db) {
        if (db->size() != p) throw std::invalid_argument("affine backward: db size mismatch");
        for (std::size_t i = 0; i < p; ++i) db->data[i] += dy.data[i];
    }
}

Tensor relu(const Tensor& x) {
    check_finite(x, "relu input");
    Tensor y = x;
    for (double& v : y.data) v = std::max(0.0, v);
    return y;
}

void relu_backward(const Tensor& x, const Tensor& dy, Tensor& dx) {
    if (x.size() != dy.size() || x.size() != dx.size()) {
        throw std::invalid_argument("relu backward size mismatch");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x.data[i] > 0.0) dx.data[i] += dy.data[i];
    }
}

Tensor sigmoid_vec(const Tensor& x) {
    check_finite(x, "sigmoid input");
    Tensor y = x;
    for (double& v : y.data) v = sigmoid(v);
    return y;
}

void sigmoid_backward(const Tensor& y, const Tensor& dy, Tensor& dx) {
    if (y.size() != dy.size() || y.size() != dx.size()) {
        throw std::invalid_argument("sigmoid backward size mismatch");
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        dx.data[i] += dy.data[i] * y.data[i] * (1.0 - y.data[i]);
    }
}

Tensor softmax(const Tensor& z) {
    if (z.rank() != 1 || z.size() == 0) {
        throw std::invalid_argument("softmax expects a non-empty vector, got " + z.shape_str());
    }
    check_finite(z, "softmax input");
    double zmax = *std::max_element(z.data.begin(), z.data.end());
    Tensor y = z;
    double total = 0.0;
    for (double& v : y.data) {
        v = std::exp(v - zmax);
        total += v;
    }
    for (double& v : y.data) v /= total;
    check_finite(y, "softmax output");
    return y;
}

void softmax_backward(const Tensor& y, const Tensor& dy, Tensor& dz) {
    if (y.size() != dy.size() || y.size() != dz.size()) {
        throw std::invalid_argument("softmax backward size mismatch");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += dy.data[i] * y.data[i];
    for (std::size_t i = 0; i < y.size(); ++i) {
        dz.data[i] += y.data[i] * (dy.data[i] - dot);
    }
}

double cross_entropy(const Tensor& p, std::size_t gt_index) {
    if (p.rank() != 1) throw std::invalid_argument("cross_entropy expects a vector");
    if (gt_index >= p.size()) {
        throw std::invalid_argument("cross_entropy index " + std::to_string(gt_index) +
                                    " out of range for " + p.shape_str());
    }
    check_finite(p, "cross_entropy input");
    return -std::log(std::max(p.data[gt_index], 1e-12));
}

void cross_entropy_backward(const Tensor& p, std::size_t gt_index, double dloss, Tensor& dp) {
    if (gt_index >= p.size() || dp.size() != p.size()) {
        throw std::invalid_argument("cross_entropy backward shape mismatch");
    }
    // Below the clamp the loss is constant in p, so the gradient is zero there.
    if (p.data[gt_index] > 1e-12) {
        dp.data[gt_index] += dloss * (-1.0 / p.data[gt_index]);
    }
}

Tensor dropout_mask(Rng& rng, std::size_t n, double rate) {
    if (rate < 0.0 || rate >= 1.0) {
        throw std::invalid_argument("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
    Tensor mask = Tensor::zeros({n});
    double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < n; ++i) {
        mask.data[i] = rng.uniform() >= rate ? keep_scale : 0.0;
    }
    return mask;
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("elementwise mul size mismatch: " + a.shape_str() + " vs " +
                                    b.shape_str());
    }
    Tensor y = a;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] *= b.data[i];
    return y;
}

}  // namespace vpl
