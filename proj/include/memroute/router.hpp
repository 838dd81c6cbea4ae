#pragma once

#include "memroute/tensor.hpp"

namespace memroute {

// Local-global routing probability predictor. Column 0 of the output is the
// refinement branch, column 1 the global attention branch.
template <typename T>
struct RouterParams {
    Tensor<T> ln_gain, ln_bias;  // [D]
    Tensor<T> w1, b1;            // [D,D], [D]
    Tensor<T> w2, b2;            // [D,2], [2]
    void validate() const;
};

// x[B,N,D] -> log_p[B,N,2]. Pipeline: layer norm; affine D->D; first half of
// the channels kept per token, second half mean-pooled over all tokens of the
// sample and shared; concat; affine D->2; log-softmax.
template <typename T>
Tensor<T> route_probs(const Tensor<T>& x, const RouterParams<T>& params);

}  // namespace memroute
