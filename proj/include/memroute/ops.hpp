#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "memroute/tensor.hpp"

// Differentiable tensor operations. Every op validates shapes, computes the
// forward result through the kernels layer, rejects non-finite outputs, and
// (when a tape is active and an input requires grad) records its backward
// closure. Elementwise binaries broadcast numpy-style: shapes are aligned at
// the trailing axes and a dimension may be 1 on one side.

namespace memroute::ops {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

// mul_c * x + add_c, elementwise with scalar constants.
template <typename T>
Tensor<T> affine(const Tensor<T>& x, T mul_c, T add_c);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);
template <typename T>
Tensor<T> abs(const Tensor<T>& x);
template <typename T>
Tensor<T> square(const Tensor<T>& x);

// a[..,n,m] x b[..,m,p]. Batch dims must match exactly, or b may be 2-D and is
// then shared across a's batch.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// a[..,n,m] x b[..,p,m]^T -> [..,n,p], same batching rules.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis);
template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, int axis);

// Normalizes the last axis; gain/bias have that axis's length.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-6));

// x[B,C,H,W], kernel[C,kh,kw] (odd, same-padded).
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& kernel);

// x[B,1,C], kernel[kw] (odd, same-padded) -> [B,1,C].
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernel);

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, std::size_t axis, bool keepdim = false);
template <typename T>
Tensor<T> sum_all(const Tensor<T>& x);
template <typename T>
Tensor<T> mean_all(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm);
template <typename T>
Tensor<T> transpose(const Tensor<T>& x);  // 2-D
template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T>
std::vector<Tensor<T>> split(const Tensor<T>& x, std::size_t axis,
                             const std::vector<std::size_t>& sizes);

// Row selection on 2-D tensors.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::size_t>& idx);
template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& rows, const std::vector<std::size_t>& idx,
                       std::size_t n_rows);

// x[b] for a leading-axis index; inverse of stack0.
template <typename T>
Tensor<T> select0(const Tensor<T>& x, std::size_t index);
template <typename T>
Tensor<T> stack0(const std::vector<Tensor<T>>& parts);

// img[B,C,H,W] -> [B, (H/p)(W/p), C*p*p].
template <typename T>
Tensor<T> extract_patches(const Tensor<T>& img, std::size_t patch);

// Transposed conv, kernel == stride == factor. k[Cin,Cout,f,f], bias[Cout].
template <typename T>
Tensor<T> upsample_conv(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& bias,
                        std::size_t factor);

// Value copy with no graph connection.
template <typename T>
Tensor<T> detach(const Tensor<T>& x);

// Forward takes hard's values; backward passes gradients straight into soft.
template <typename T>
Tensor<T> straight_through(const Tensor<T>& soft, const Tensor<T>& hard);

// Throws NumericError if x contains NaN/Inf; used by every op epilogue.
template <typename T>
void ensure_finite(const Tensor<T>& x, const char* op);

}  // namespace memroute::ops
