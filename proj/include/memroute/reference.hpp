#pragma once

#include <cstddef>
#include <vector>

// Naive serial reference implementations. These are deliberately written as
// direct transcriptions of the math (triple loops, direct exp/sum) with no
// shared code with the kernels layer; tests and `memroute verify` compare the
// production path against them, and the kernel benchmark uses them as the
// serial baseline.

namespace memroute::ref {

// c[n,p] = a[n,m] . b[m,p], triple loop.
void matmul(const double* a, const double* b, double* c, std::size_t n, std::size_t m,
            std::size_t p);

// Direct exp/normalize per row (no max subtraction).
void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);
void log_softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols);

void layer_norm_rows(const double* x, const double* gain, const double* bias, double eps,
                     double* y, std::size_t rows, std::size_t cols);

void dwconv2d(const double* x, const double* k, double* y, std::size_t B, std::size_t C,
              std::size_t H, std::size_t W, std::size_t kh, std::size_t kw);

void conv1d_same(const double* x, const double* k, double* y, std::size_t B, std::size_t L,
                 std::size_t kw);

// Multi-head self-attention over one sequence: x[N,D] with per-head loops.
// wq..wo are [D,D]; output [N,D].
void attention(const double* x, const double* wq, const double* wk, const double* wv,
               const double* wo, std::size_t n, std::size_t d_model, std::size_t heads,
               double* out);

// Straight-line transcription of the router probability pipeline: layer norm,
// affine D->D, split channels, global mean of the second half, concat, affine
// D->2, log-softmax. x[N,D] -> log_p[N,2].
void router_log_probs(const double* x, const double* ln_gain, const double* ln_bias,
                      const double* w1, const double* b1, const double* w2,
                      const double* b2, std::size_t n, std::size_t d, double eps,
                      double* log_p);

// Straight-line transcription of the token refinement pipeline: affine D->D,
// 3x3 depthwise conv on the token grid, affine D->D, channel gate from a 1-D
// conv over per-channel means. x[N,D] with N = hp*wp.
void ltrm(const double* x, const double* w1, const double* b1, const double* dw,
          const double* w2, const double* b2, const double* eca, std::size_t eca_k,
          std::size_t hp, std::size_t wp, std::size_t d, double* out);

}  // namespace memroute::ref
