#pragma once

#include <cstddef>

// Numeric kernels behind the ops layer. Every kernel writes each output
// element exactly once from a fixed-order inner loop, so the OpenMP path is
// bitwise identical to the serial path regardless of thread count. The
// parallel switch is global; tests assert the bitwise match.

namespace memroute::kernels {

bool parallel_enabled();
void set_parallel(bool on);
int max_threads();

// ---- dense linear algebra (row-major) ----
// matmul:    a[batch,n,m] x b[batch,m,p] -> out[batch,n,p]
// matmul_nt: a[batch,n,m] x b[batch,p,m]^T -> out[batch,n,p]
// matmul_tn: a[batch,m,n]^T x b[batch,m,p] -> out[batch,n,p]
// shared_b: b has no batch dim (reused for every batch index).
template <typename T>
void matmul(const T* a, const T* b, T* out, std::size_t batch, std::size_t n,
            std::size_t m, std::size_t p, bool shared_b);
template <typename T>
void matmul_nt(const T* a, const T* b, T* out, std::size_t batch, std::size_t n,
               std::size_t m, std::size_t p, bool shared_b);
template <typename T>
void matmul_tn(const T* a, const T* b, T* out, std::size_t batch, std::size_t n,
               std::size_t m, std::size_t p, bool shared_b);

// ---- row-wise softmax family (last axis) ----
template <typename T>
void softmax_rows(const T* x, T* y, std::size_t rows, std::size_t cols);
template <typename T>
void softmax_bwd_rows(const T* y, const T* gy, T* gx, std::size_t rows, std::size_t cols);
template <typename T>
void log_softmax_rows(const T* x, T* y, std::size_t rows, std::size_t cols);
template <typename T>
void log_softmax_bwd_rows(const T* y, const T* gy, T* gx, std::size_t rows, std::size_t cols);

// ---- layer norm over the last axis ----
// Saves xhat and inv_std for the backward pass.
template <typename T>
void layer_norm_rows(const T* x, const T* gain, const T* bias, T eps, T* y, T* xhat,
                     T* inv_std, std::size_t rows, std::size_t cols);
template <typename T>
void layer_norm_bwd_rows(const T* xhat, const T* inv_std, const T* gain, const T* gy,
                         T* gx, T* ggain, T* gbias, std::size_t rows, std::size_t cols);

// ---- convolutions (zero padded, "same" output size, odd kernels) ----
template <typename T>
void dwconv2d(const T* x, const T* k, T* y, std::size_t B, std::size_t C, std::size_t H,
              std::size_t W, std::size_t kh, std::size_t kw);
template <typename T>
void dwconv2d_bwd_input(const T* k, const T* gy, T* gx, std::size_t B, std::size_t C,
                        std::size_t H, std::size_t W, std::size_t kh, std::size_t kw);
template <typename T>
void dwconv2d_bwd_kernel(const T* x, const T* gy, T* gk, std::size_t B, std::size_t C,
                         std::size_t H, std::size_t W, std::size_t kh, std::size_t kw);

// Single shared 1-D kernel slid along length-L rows of x[B,L].
template <typename T>
void conv1d_same(const T* x, const T* k, T* y, std::size_t B, std::size_t L, std::size_t kw);
template <typename T>
void conv1d_bwd_input(const T* k, const T* gy, T* gx, std::size_t B, std::size_t L,
                      std::size_t kw);
template <typename T>
void conv1d_bwd_kernel(const T* x, const T* gy, T* gk, std::size_t B, std::size_t L,
                       std::size_t kw);

// ---- patching / upsampling ----
// img[B,C,H,W] -> out[B, (H/p)*(W/p), C*p*p]; patch vectors are C-major then
// row-major within the patch.
template <typename T>
void extract_patches(const T* img, T* out, std::size_t B, std::size_t C, std::size_t H,
                     std::size_t W, std::size_t p);
template <typename T>
void extract_patches_bwd(const T* g, T* gimg, std::size_t B, std::size_t C, std::size_t H,
                         std::size_t W, std::size_t p);

// Transposed conv with kernel == stride == f (non-overlapping blocks).
// x[B,Cin,H,W], k[Cin,Cout,f,f], bias[Cout] -> y[B,Cout,H*f,W*f].
template <typename T>
void upsample_conv(const T* x, const T* k, const T* bias, T* y, std::size_t B,
                   std::size_t Cin, std::size_t Cout, std::size_t H, std::size_t W,
                   std::size_t f);
template <typename T>
void upsample_conv_bwd_input(const T* k, const T* gy, T* gx, std::size_t B, std::size_t Cin,
                             std::size_t Cout, std::size_t H, std::size_t W, std::size_t f);
template <typename T>
void upsample_conv_bwd_kernel(const T* x, const T* gy, T* gk, std::size_t B, std::size_t Cin,
                              std::size_t Cout, std::size_t H, std::size_t W, std::size_t f);
template <typename T>
void upsample_conv_bwd_bias(const T* gy, T* gbias, std::size_t B, std::size_t Cout,
                            std::size_t HW);

// ---- elementwise maps ----
template <typename T>
void sigmoid_map(const T* x, T* y, std::size_t n);
template <typename T>
void sigmoid_bwd(const T* y, const T* gy, T* gx, std::size_t n);
template <typename T>
void gelu_map(const T* x, T* y, std::size_t n);
template <typename T>
void gelu_bwd(const T* x, const T* gy, T* gx, std::size_t n);
template <typename T>
void abs_map(const T* x, T* y, std::size_t n);
template <typename T>
void abs_bwd(const T* x, const T* gy, T* gx, std::size_t n);
template <typename T>
void affine_map(const T* x, T mul, T add, T* y, std::size_t n);

enum class BinaryOp { add, sub, mul };

template <typename T>
void binary_same(BinaryOp op, const T* a, const T* b, T* y, std::size_t n);

// Broadcast binary op. Strides are in elements; broadcast dims carry stride 0.
template <typename T>
void binary_bcast(BinaryOp op, const T* a, const std::size_t* astride, const T* b,
                  const std::size_t* bstride, T* y, const std::size_t* oshape,
                  std::size_t ndim);

// y[i] += x[i]
template <typename T>
void accumulate(const T* x, T* y, std::size_t n);

// Sum over the middle axis: x[outer, axis, inner] -> y[outer, inner].
template <typename T>
void reduce_sum_mid(const T* x, T* y, std::size_t outer, std::size_t axis_n,
                    std::size_t inner);

template <typename T>
bool all_finite(const T* x, std::size_t n);

}  // namespace memroute::kernels
