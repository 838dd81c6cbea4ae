#include "memroute/router.hpp"

#include "memroute/ops.hpp"

namespace memroute {

template <typename T>
void RouterParams<T>::validate() const {
    const std::size_t d = w1.dim(0);
    if (d % 2 != 0)
        throw ConfigError("router: channel dim must be even for the local/global split, got " +
                          std::to_string(d));
    if (w1.ndim() != 2 || w1.dim(1) != d)
        throw ShapeError("router: w1 must be [D,D], got " + shape_str(w1.shape()));
    if (w2.ndim() != 2 || w2.dim(0) != d || w2.dim(1) != 2)
        throw ShapeError("router: w2 must be [D,2], got " + shape_str(w2.shape()));
    if (ln_gain.dim(0) != d || ln_bias.dim(0) != d || b1.dim(0) != d || b2.dim(0) != 2)
        throw ShapeError("router: parameter vector lengths inconsistent with D=" +
                         std::to_string(d));
}

template <typename T>
Tensor<T> route_probs(const Tensor<T>& x, const RouterParams<T>& params) {
    params.validate();
    if (x.ndim() != 3 || x.dim(2) != params.w1.dim(0))
        throw ShapeError("route_probs: expected tokens [B,N,D] with D=" +
                         std::to_string(params.w1.dim(0)) + ", got " +
                         shape_str(x.shape()));
    const std::size_t B = x.dim(0), N = x.dim(1), D = x.dim(2), half = D / 2;
    auto normed = ops::layer_norm(x, params.ln_gain, params.ln_bias);
    auto z = ops::reshape(
        ops::add(ops::matmul(ops::reshape(normed, {B * N, D}), params.w1), params.b1),
        {B, N, D});
    auto halves = ops::split(z, 2, {half, half});
    auto local = halves[0];                              // [B,N,D/2]
    auto global = ops::mean_axis(halves[1], 1, true);    // [B,1,D/2], shared by all tokens
    auto global_rep = ops::broadcast_to(global, {B, N, half});
    auto zcat = ops::concat<T>({local, global_rep}, 2);  // [B,N,D]
    auto logits = ops::reshape(
        ops::add(ops::matmul(ops::reshape(zcat, {B * N, D}), params.w2), params.b2),
        {B, N, 2});
    return ops::log_softmax(logits, -1);
}

template struct RouterParams<float>;
template struct RouterParams<double>;
template Tensor<float> route_probs<float>(const Tensor<float>&, const RouterParams<float>&);
template Tensor<double> route_probs<double>(const Tensor<double>&,
                                            const RouterParams<double>&);

}  // namespace memroute
