#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "memroute/tensor.hpp"

namespace memroute {

template <typename T>
struct AttentionParams {
    Tensor<T> wq, wk, wv, wo;  // all [D,D]
    std::size_t heads = 1;

    std::size_t dim() const { return wq.dim(0); }
    std::size_t head_dim() const { return dim() / heads; }
    void validate() const;
};

// Multi-head self-attention over x[B,N,D]: per-head scaled dot-product with
// scores softmaxed over keys, heads concatenated, then the output projection.
template <typename T>
Tensor<T> attend(const Tensor<T>& x, const AttentionParams<T>& params);

// Attention restricted to a token subset of one sample: gathers rows `idx`
// from x[N,D], attends among them only, and returns just the updated rows;
// the caller scatters them back. Indices must be strictly increasing.
template <typename T>
Tensor<T> attend_rows(const Tensor<T>& x, const std::vector<std::size_t>& idx,
                      const AttentionParams<T>& params);

// Per-sample subset attention over a batch x[B,N,D].
template <typename T>
std::vector<Tensor<T>> attend_subset(const Tensor<T>& x,
                                     const std::vector<std::vector<std::size_t>>& idx,
                                     const AttentionParams<T>& params);

struct AttentionCost {
    std::uint64_t attn_map_bytes = 0;
    std::uint64_t flops = 0;
};

// Analytic cost of one attention call over n_routed tokens:
//   attn_map_bytes = dtype_bytes * heads * n_routed^2
//   flops = 4 * heads * n_routed^2 * head_dim        (QK^T and attn.V)
//         + 8 * n_routed * dim^2                     (Q,K,V,O projections)
// with head_dim = dim / heads. Exact integer arithmetic.
AttentionCost attention_cost(std::uint64_t n_routed, std::uint64_t heads,
                             std::uint64_t dim, std::uint64_t dtype_bytes = 4);

struct CostReport {
    struct PerBlock {
        std::size_t block = 0;
        std::uint64_t routed_tokens = 0;
        std::uint64_t attn_map_bytes = 0;
        std::uint64_t flops = 0;
    };
    std::vector<PerBlock> per_block;

    std::uint64_t total_bytes() const;
    std::uint64_t total_flops() const;
    // CSV: header, one row per block, and a trailing "total" row.
    void write_csv(std::ostream& os) const;
};

}  // namespace memroute
