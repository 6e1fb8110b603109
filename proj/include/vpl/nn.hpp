#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vpl/rng.hpp"
#include "vpl/tensor.hpp"

namespace vpl {

// y = Wx + b. W is [p x m], x is [m], b and y are [p].
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
// Accumulates analytic gradients into dx, dw, db. Any of them may be null to
// skip that input.
void affine_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor* dw,
                     Tensor* db);

Tensor relu(const Tensor& x);
void relu_backward(const Tensor& x, const Tensor& dy, Tensor& dx);

Tensor sigmoid_vec(const Tensor& x);
// y is the forward output.
void sigmoid_backward(const Tensor& y, const Tensor& dy, Tensor& dx);

// Max-subtracted, numerically stable. Output sums to 1 within 1e-12.
Tensor softmax(const Tensor& z);
void softmax_backward(const Tensor& y, const Tensor& dy, Tensor& dz);

// -log(max(p[gt_index], 1e-12)).
double cross_entropy(const Tensor& p, std::size_t gt_index);
void cross_entropy_backward(const Tensor& p, std::size_t gt_index, double dloss, Tensor& dp);

// Inverted-dropout mask: each entry is 0 with probability rate, else
// 1/(1-rate). rate must lie in [0, 1).
Tensor dropout_mask(Rng& rng, std::size_t n, double rate);

Tensor elementwise_mul(const Tensor& a, const Tensor& b);

}  // namespace vpl
