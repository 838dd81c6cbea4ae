#include "memroute/ltrm.hpp"

#include <cmath>

#include "memroute/ops.hpp"

namespace memroute {

template <typename T>
void LtrmParams<T>::validate() const {
    const std::size_t d = w1.dim(0);
    if (w1.ndim() != 2 || w1.dim(1) != d || w2.ndim() != 2 || w2.dim(0) != d ||
        w2.dim(1) != d)
        throw ShapeError("ltrm: w1/w2 must be [D,D]");
    if (b1.dim(0) != d || b2.dim(0) != d)
        throw ShapeError("ltrm: biases must be [D]");
    if (dw_kernel.ndim() != 3 || dw_kernel.dim(0) != d ||
        dw_kernel.dim(1) != dw_kernel.dim(2))
        throw ShapeError("ltrm: depthwise kernel must be square [D,k,k], got " +
                         shape_str(dw_kernel.shape()));
    if (dw_kernel.dim(1) % 2 == 0)
        throw ConfigError("ltrm: depthwise kernel size must be odd");
    if (eca_kernel.ndim() != 1 || eca_kernel.dim(0) % 2 == 0)
        throw ConfigError("ltrm: channel-attention kernel length must be odd");
}

std::size_t eca_kernel_size(std::size_t channels) {
    const double t = std::log2(static_cast<double>(channels)) / 2.0 + 0.5;
    auto k = static_cast<std::size_t>(std::llround(t));
    if (k % 2 == 0) ++k;
    return std::max<std::size_t>(k, 3);
}

template <typename T>
Tensor<T> ltrm_forward(const Tensor<T>& x, std::size_t hp, std::size_t wp,
                       const LtrmParams<T>& params) {
    params.validate();
    if (x.ndim() != 3 || x.dim(2) != params.w1.dim(0))
        throw ShapeError("ltrm_forward: expected tokens [B,N,D], got " +
                         shape_str(x.shape()));
    const std::size_t B = x.dim(0), N = x.dim(1), D = x.dim(2);
    if (hp * wp != N)
        throw ShapeError("ltrm_forward: grid " + std::to_string(hp) + "x" +
                         std::to_string(wp) + " does not cover " + std::to_string(N) +
                         " tokens");
    auto t = ops::add(ops::matmul(ops::reshape(x, {B * N, D}), params.w1), params.b1);
    auto grid = ops::permute(ops::reshape(t, {B, hp, wp, D}), {0, 3, 1, 2});  // [B,D,hp,wp]
    grid = ops::depthwise_conv2d(grid, params.dw_kernel);
    auto back = ops::reshape(ops::permute(grid, {0, 2, 3, 1}), {B * N, D});
    auto y = ops::reshape(ops::add(ops::matmul(back, params.w2), params.b2), {B, N, D});
    // channel gate from per-channel global averages
    auto desc = ops::mean_axis(y, 1, false);                       // [B,D]
    auto conv = ops::conv1d(ops::reshape(desc, {B, std::size_t(1), D}), params.eca_kernel);
    auto gate = ops::sigmoid(conv);                                // [B,1,D], values in (0,1)
    return ops::mul(y, gate);
}

std::uint64_t ltrm_cost(std::uint64_t n, std::uint64_t d) {
    return 2 * n * d * d + 9 * n * d + 2 * n * d * d + n * d + n * d;
}

template struct LtrmParams<float>;
template struct LtrmParams<double>;
template Tensor<float> ltrm_forward<float>(const Tensor<float>&, std::size_t, std::size_t,
                                           const LtrmParams<float>&);
template Tensor<double> ltrm_forward<double>(const Tensor<double>&, std::size_t,
                                             std::size_t, const LtrmParams<double>&);

}  // namespace memroute
