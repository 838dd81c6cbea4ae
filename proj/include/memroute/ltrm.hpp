#pragma once

#include <cstdint>

#include "memroute/tensor.hpp"

namespace memroute {

// Lightweight token refinement: affine, 3x3 depthwise conv over the token
// grid, affine, then an efficient-channel-attention gate (sigmoid of a 1-D
// conv over per-channel global averages).
template <typename T>
struct LtrmParams {
    Tensor<T> w1, b1;      // [D,D], [D]
    Tensor<T> dw_kernel;   // [D,kh,kw], odd square
    Tensor<T> w2, b2;      // [D,D], [D]
    Tensor<T> eca_kernel;  // [k_eca], odd
    void validate() const;
};

// Adaptive ECA kernel size for channel count D: nearest odd integer to
// log2(D)/2 + 1/2, floored at 3.
std::size_t eca_kernel_size(std::size_t channels);

template <typename T>
Tensor<T> ltrm_forward(const Tensor<T>& x, std::size_t hp, std::size_t wp,
                       const LtrmParams<T>& params);

// Analytic flop count, exact integers, strictly linear in N:
//   2*N*D^2 (first affine) + 9*N*D (3x3 depthwise) + 2*N*D^2 (second affine)
//   + N*D (channel averages) + N*D (gate multiply).
// The O(k*D) descriptor conv and sigmoid are resolution-independent and
// omitted from the count.
std::uint64_t ltrm_cost(std::uint64_t n_tokens, std::uint64_t dim);

}  // namespace memroute
