#include "memroute/attention.hpp"

#include <cmath>

#include "memroute/ops.hpp"

namespace memroute {

template <typename T>
void AttentionParams<T>::validate() const {
    const std::size_t d = wq.dim(0);
    for (const Tensor<T>* w : {&wq, &wk, &wv, &wo})
        if (w->ndim() != 2 || w->dim(0) != d || w->dim(1) != d)
            throw ShapeError("attention weights must all be [D,D], got " +
                             shape_str(w->shape()));
    if (heads == 0 || d % heads != 0)
        throw ConfigError("attention: dim " + std::to_string(d) +
                          " not divisible by heads " + std::to_string(heads));
}

namespace {

template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t B, std::size_t N, std::size_t h,
                      std::size_t hd) {
    // [B*N, D] -> [B*h, N, hd]
    return ops::reshape(
        ops::permute(ops::reshape(x, {B, N, h, hd}), {0, 2, 1, 3}), {B * h, N, hd});
}

}  // namespace

template <typename T>
Tensor<T> attend(const Tensor<T>& x, const AttentionParams<T>& params) {
    params.validate();
    if (x.ndim() != 3 || x.dim(2) != params.dim())
        throw ShapeError("attend: expected tokens [B,N,D] with D=" +
                         std::to_string(params.dim()) + ", got " + shape_str(x.shape()));
    const std::size_t B = x.dim(0), N = x.dim(1), D = x.dim(2);
    const std::size_t h = params.heads, hd = D / h;
    auto flat = ops::reshape(x, {B * N, D});
    auto q = split_heads(ops::matmul(flat, params.wq), B, N, h, hd);
    auto k = split_heads(ops::matmul(flat, params.wk), B, N, h, hd);
    auto v = split_heads(ops::matmul(flat, params.wv), B, N, h, hd);
    auto scores = ops::affine(ops::matmul_nt(q, k),
                              T(1) / static_cast<T>(std::sqrt(static_cast<double>(hd))),
                              T(0));
    scores = ops::softmax(scores, -1);
    auto ctx = ops::matmul(scores, v);  // [B*h, N, hd]
    auto merged = ops::reshape(ops::permute(ops::reshape(ctx, {B, h, N, hd}), {0, 2, 1, 3}),
                               {B * N, D});
    return ops::reshape(ops::matmul(merged, params.wo), {B, N, D});
}

template <typename T>
Tensor<T> attend_rows(const Tensor<T>& x, const std::vector<std::size_t>& idx,
                      const AttentionParams<T>& params) {
    if (x.ndim() != 2)
        throw ShapeError("attend_rows: expects one sample [N,D], got " +
                         shape_str(x.shape()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
        if (idx[j] >= x.dim(0))
            throw ShapeError("attend_rows: index " + std::to_string(idx[j]) +
                             " out of range for " + std::to_string(x.dim(0)) + " tokens");
        if (j > 0 && idx[j] <= idx[j - 1])
            throw ShapeError("attend_rows: indices must be strictly increasing");
    }
    const std::size_t K = idx.size(), D = x.dim(1);
    auto rows = ops::gather_rows(x, idx);
    auto updated = attend(ops::reshape(rows, {1, K, D}), params);
    return ops::reshape(updated, {K, D});
}

template <typename T>
std::vector<Tensor<T>> attend_subset(const Tensor<T>& x,
                                     const std::vector<std::vector<std::size_t>>& idx,
                                     const AttentionParams<T>& params) {
    if (x.ndim() != 3)
        throw ShapeError("attend_subset: expects [B,N,D], got " + shape_str(x.shape()));
    if (idx.size() != x.dim(0))
        throw ShapeError("attend_subset: need one index list per sample");
    std::vector<Tensor<T>> out;
    out.reserve(idx.size());
    for (std::size_t b = 0; b < idx.size(); ++b)
        out.push_back(attend_rows(ops::select0(x, b), idx[b], params));
    return out;
}

AttentionCost attention_cost(std::uint64_t n_routed, std::uint64_t heads,
                             std::uint64_t dim, std::uint64_t dtype_bytes) {
    const std::uint64_t hd = heads ? dim / heads : 0;
    AttentionCost c;
    c.attn_map_bytes = dtype_bytes * heads * n_routed * n_routed;
    c.flops = 4 * heads * n_routed * n_routed * hd + 8 * n_routed * dim * dim;
    return c;
}

std::uint64_t CostReport::total_bytes() const {
    std::uint64_t t = 0;
    for (const auto& b : per_block) t += b.attn_map_bytes;
    return t;
}

std::uint64_t CostReport::total_flops() const {
    std::uint64_t t = 0;
    for (const auto& b : per_block) t += b.flops;
    return t;
}

void CostReport::write_csv(std::ostream& os) const {
    os << "block,routed_tokens,attn_map_bytes,flops\n";
    std::uint64_t tr = 0;
    for (const auto& b : per_block) {
        os << b.block << ',' << b.routed_tokens << ',' << b.attn_map_bytes << ','
           << b.flops << '\n';
        tr += b.routed_tokens;
    }
    os << "total," << tr << ',' << total_bytes() << ',' << total_flops() << '\n';
}

template struct AttentionParams<float>;
template struct AttentionParams<double>;
template Tensor<float> attend<float>(const Tensor<float>&, const AttentionParams<float>&);
template Tensor<double> attend<double>(const Tensor<double>&,
                                       const AttentionParams<double>&);
template Tensor<float> attend_rows<float>(const Tensor<float>&,
                                          const std::vector<std::size_t>&,
                                          const AttentionParams<float>&);
template Tensor<double> attend_rows<double>(const Tensor<double>&,
                                            const std::vector<std::size_t>&,
                                            const AttentionParams<double>&);
template std::vector<Tensor<float>> attend_subset<float>(
    const Tensor<float>&, const std::vector<std::vector<std::size_t>>&,
    const AttentionParams<float>&);
template std::vector<Tensor<double>> attend_subset<double>(
    const Tensor<double>&, const std::vector<std::vector<std::size_t>>&,
    const AttentionParams<double>&);

}  // namespace memroute
