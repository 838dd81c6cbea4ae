#pragma once

#include <cstdint>
#include <utility>

#include "memroute/rng.hpp"
#include "memroute/tensor.hpp"

namespace memroute {

enum class Difficulty { easy, hard };

// Foreground/background pair with its alpha matte and the composited image
// I = alpha*F + (1-alpha)*B.
template <typename T>
struct CompositeSample {
    Tensor<T> fg, bg;  // [C,H,W] in [0,1]
    Tensor<T> alpha;   // [H,W] in [0,1]
    Tensor<T> image;   // [C,H,W]
};

// Elementwise alpha compositing; alpha must lie in [0,1].
template <typename T>
Tensor<T> composite(const Tensor<T>& fg, const Tensor<T>& bg, const Tensor<T>& alpha);

// Procedural sample: smooth-noise foreground/background and an alpha matte
// that is an anti-aliased disk or convex polygon (easy) or a gradient /
// soft-blob matte with large fractional regions (hard). Deterministic in rng.
template <typename T>
CompositeSample<T> gen_toy_sample(Rng& rng, std::size_t size, Difficulty difficulty);

// ---- losses ----

// Mean squared feature difference between teacher and student tokens.
// per_channel_mean divides by B*N*D; otherwise the channel axis is summed and
// only B*N divides (the token-mean form).
template <typename T>
Tensor<T> distill_loss(const Tensor<T>& teacher, const Tensor<T>& student,
                       bool per_channel_mean = true);

// (rho - gamma)^2, differentiable in gamma.
template <typename T>
Tensor<T> compress_loss(const Tensor<T>& gamma_soft, double rho);

// Mean absolute difference; a stand-in for a full matting loss stack.
template <typename T>
Tensor<T> matting_loss(const Tensor<T>& pred_alpha, const Tensor<T>& true_alpha);

// SAD = sum |pred-true| (raw; conventionally displayed /1000) and
// MSE = 1000 * mean (pred-true)^2.
template <typename T>
std::pair<double, double> metrics_sad_mse(const Tensor<T>& pred, const Tensor<T>& truth);

}  // namespace memroute
