#include "memroute/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace memroute::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Each worker owns a contiguous index range; per-element work is a pure
// function of the index, so thread count never changes the result.
template <typename F>
inline void parallel_for(std::size_t n, F&& f) {
#ifdef _OPENMP
    if (g_parallel.load(std::memory_order_relaxed) && n > 1) {
        const auto sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < sn; ++i) f(static_cast<std::size_t>(i));
        return;
    }
#endif
    for (std::size_t i = 0; i < n; ++i) f(i);
}

}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// ---- matmul family ----

template <typename T>
void matmul(const T* a, const T* b, T* out, std::size_t batch, std::size_t n,
            std::size_t m, std::size_t p, bool shared_b) {
    parallel_for(batch * n, [=](std::size_t row) {
        const std::size_t bi = row / n, i = row % n;
        const T* arow = a + (bi * n + i) * m;
        const T* bmat = shared_b ? b : b + bi * m * p;
        T* orow = out + (bi * n + i) * p;
        for (std::size_t j = 0; j < p; ++j) orow[j] = T(0);
        for (std::size_t k = 0; k < m; ++k) {
            const T av = arow[k];
            const T* brow = bmat + k * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += av * brow[j];
        }
    });
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* out, std::size_t batch, std::size_t n,
               std::size_t m, std::size_t p, bool shared_b) {
    parallel_for(batch * n, [=](std::size_t row) {
        const std::size_t bi = row / n, i = row % n;
        const T* arow = a + (bi * n + i) * m;
        const T* bmat = shared_b ? b : b + bi * p * m;
        T* orow = out + (bi * n + i) * p;
        for (std::size_t j = 0; j < p; ++j) {
            const T* brow = bmat + j * m;
            T acc = T(0);
            for (std::size_t k = 0; k < m; ++k) acc += arow[k] * brow[k];
            orow[j] = acc;
        }
    });
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* out, std::size_t batch, std::size_t n,
               std::size_t m, std::size_t p, bool shared_b) {
    parallel_for(batch * n, [=](std::size_t row) {
        const std::size_t bi = row / n, i = row % n;
        const T* amat = a + bi * m * n;
        const T* bmat = shared_b ? b : b + bi * m * p;
        T* orow = out + (bi * n + i) * p;
        for (std::size_t j = 0; j < p; ++j) orow[j] = T(0);
        for (std::size_t k = 0; k < m; ++k) {
            const T av = amat[k * n + i];
            const T* brow = bmat + k * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += av * brow[j];
        }
    });
}

// ---- softmax family ----

template <typename T>
void softmax_rows(const T* x, T* y, std::size_t rows, std::size_t cols) {
    parallel_for(rows, [=](std::size_t r) {
        const T* xr = x + r * cols;
        T* yr = y + r * cols;
        T mx = xr[0];
        for (std::size_t c = 1; c < cols; ++c) mx = xr[c] > mx ? xr[c] : mx;
        T sum = T(0);
        for (std::size_t c = 0; c < cols; ++c) {
            yr[c] = std::exp(xr[c] - mx);
            sum += yr[c];
        }
        const T inv = T(1) / sum;
        for (std::size_t c = 0; c < cols; ++c) yr[c] *= inv;
    });
}

template <typename T>
void softmax_bwd_rows(const T* y, const T* gy, T* gx, std::size_t rows, std::size_t cols) {
    parallel_for(rows, [=](std::size_t r) {
        const T* yr = y + r * cols;
        const T* gr = gy + r * cols;
        T* out = gx + r * cols;
        T dot = T(0);
        for (std::size_t c = 0; c < cols; ++c) dot += yr[c] * gr[c];
        for (std::size_t c = 0; c < cols; ++c) out[c] = yr[c] * (gr[c] - dot);
    });
}

template <typename T>
void log_softmax_rows(const T* x, T* y, std::size_t rows, std::size_t cols) {
    parallel_for(rows, [=](std::size_t r) {
        const T* xr = x + r * cols;
        T* yr = y + r * cols;
        T mx = xr[0];
        for (std::size_t c = 1; c < cols; ++c) mx = xr[c] > mx ? xr[c] : mx;
        T sum = T(0);
        for (std::size_t c = 0; c < cols; ++c) sum += std::exp(xr[c] - mx);
        const T lse = mx + std::log(sum);
        for (std::size_t c = 0; c < cols; ++c) yr[c] = xr[c] - lse;
    });
}

template <typename T>
void log_softmax_bwd_rows(const T* y, const T* gy, T* gx, std::size_t rows,
                          std::size_t cols) {
    parallel_for(rows, [=](std::size_t r) {
        const T* yr = y + r * cols;
        const T* gr = gy + r * cols;
        T* out = gx + r * cols;
        T gsum = T(0);
        for (std::size_t c = 0; c < cols; ++c) gsum += gr[c];
        for (std::size_t c = 0; c < cols; ++c) out[c] = gr[c] - std::exp(yr[c]) * gsum;
    });
}

// ---- layer norm ----

template <typename T>
void layer_norm_rows(const T* x, const T* gain, const T* bias, T eps, T* y, T* xhat,
                     T* inv_std, std::size_t rows, std::size_t cols) {
    parallel_for(rows, [=](std::size_t r) {
        const T* xr = x + r * cols;
        T* yr = y + r * cols;
        T* hr = xhat + r * cols;
        T mean = T(0);
        for (std::size_t c = 0; c < cols; ++c) mean += xr[c];
        mean /= static_cast<T>(cols);
        T var = T(0);
        for (std::size_t c = 0; c < cols; ++c) {
            const T d = xr[c] - mean;
            var += d * d;
        }
        var /= static_cast<T>(cols);
        const T is = T(1) / std::sqrt(var + eps);
        inv_std[r] = is;
        for (std::size_t c = 0; c < cols; ++c) {
            hr[c] = (xr[c] - mean) * is;
            yr[c] = gain[c] * hr[c] + bias[c];
        }
    });
}

template <typename T>
void layer_norm_bwd_rows(const T* xhat, const T* inv_std, const T* gain, const T* gy,
                         T* gx, T* ggain, T* gbias, std::size_t rows, std::size_t cols) {
    parallel_for(rows, [=](std::size_t r) {
        const T* hr = xhat + r * cols;
        const T* gr = gy + r * cols;
        T* out = gx + r * cols;
        T mean_dh = T(0), mean_dh_h = T(0);
        for (std::size_t c = 0; c < cols; ++c) {
            const T dh = gr[c] * gain[c];
            mean_dh += dh;
            mean_dh_h += dh * hr[c];
        }
        mean_dh /= static_cast<T>(cols);
        mean_dh_h /= static_cast<T>(cols);
        const T is = inv_std[r];
        for (std::size_t c = 0; c < cols; ++c) {
            const T dh = gr[c] * gain[c];
            out[c] = (dh - mean_dh - hr[c] * mean_dh_h) * is;
        }
    });
    // Parameter grads: one serial reduction per column.
    parallel_for(cols, [=](std::size_t c) {
        T gg = T(0), gb = T(0);
        for (std::size_t r = 0; r < rows; ++r) {
            gg += gy[r * cols + c] * xhat[r * cols + c];
            gb += gy[r * cols + c];
        }
        ggain[c] += gg;
        gbias[c] += gb;
    });
}

// ---- convolutions ----

template <typename T>
void dwconv2d(const T* x, const T* k, T* y, std::size_t B, std::size_t C, std::size_t H,
              std::size_t W, std::size_t kh, std::size_t kw) {
    const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh) / 2;
    const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(kw) / 2;
    parallel_for(B * C, [=](std::size_t bc) {
        const T* xp = x + bc * H * W;
        const T* kp = k + (bc % C) * kh * kw;
        T* yp = y + bc * H * W;
        for (std::size_t i = 0; i < H; ++i) {
            for (std::size_t j = 0; j < W; ++j) {
                T acc = T(0);
                for (std::size_t u = 0; u < kh; ++u) {
                    const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i) + u - ph;
                    if (si < 0 || si >= static_cast<std::ptrdiff_t>(H)) continue;
                    for (std::size_t v = 0; v < kw; ++v) {
                        const std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(j) + v - pw;
                        if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(W)) continue;
                        acc += xp[si * W + sj] * kp[u * kw + v];
                    }
                }
                yp[i * W + j] = acc;
            }
        }
    });
}

template <typename T>
void dwconv2d_bwd_input(const T* k, const T* gy, T* gx, std::size_t B, std::size_t C,
                        std::size_t H, std::size_t W, std::size_t kh, std::size_t kw) {
    const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh) / 2;
    const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(kw) / 2;
    parallel_for(B * C, [=](std::size_t bc) {
        const T* gp = gy + bc * H * W;
        const T* kp = k + (bc % C) * kh * kw;
        T* xp = gx + bc * H * W;
        // gx = correlation of gy with the flipped kernel
        for (std::size_t i = 0; i < H; ++i) {
            for (std::size_t j = 0; j < W; ++j) {
                T acc = T(0);
                for (std::size_t u = 0; u < kh; ++u) {
                    const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i) + ph - u;
                    if (si < 0 || si >= static_cast<std::ptrdiff_t>(H)) continue;
                    for (std::size_t v = 0; v < kw; ++v) {
                        const std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(j) + pw - v;
                        if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(W)) continue;
                        acc += gp[si * W + sj] * kp[u * kw + v];
                    }
                }
                xp[i * W + j] += acc;
            }
        }
    });
}

template <typename T>
void dwconv2d_bwd_kernel(const T* x, const T* gy, T* gk, std::size_t B, std::size_t C,
                         std::size_t H, std::size_t W, std::size_t kh, std::size_t kw) {
    const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh) / 2;
    const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(kw) / 2;
    parallel_for(C, [=](std::size_t c) {
        T* kp = gk + c * kh * kw;
        for (std::size_t u = 0; u < kh; ++u) {
            for (std::size_t v = 0; v < kw; ++v) {
                T acc = T(0);
                for (std::size_t b = 0; b < B; ++b) {
                    const T* xp = x + (b * C + c) * H * W;
                    const T* gp = gy + (b * C + c) * H * W;
                    for (std::size_t i = 0; i < H; ++i) {
                        const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i) + u - ph;
                        if (si < 0 || si >= static_cast<std::ptrdiff_t>(H)) continue;
                        for (std::size_t j = 0; j < W; ++j) {
                            const std::ptrdiff_t sj =
                                static_cast<std::ptrdiff_t>(j) + v - pw;
                            if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(W)) continue;
                            acc += gp[i * W + j] * xp[si * W + sj];
                        }
                    }
                }
                kp[u * kw + v] += acc;
            }
        }
    });
}

template <typename T>
void conv1d_same(const T* x, const T* k, T* y, std::size_t B, std::size_t L,
                 std::size_t kw) {
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kw) / 2;
    parallel_for(B, [=](std::size_t b) {
        const T* xb = x + b * L;
        T* yb = y + b * L;
        for (std::size_t i = 0; i < L; ++i) {
            T acc = T(0);
            for (std::size_t v = 0; v < kw; ++v) {
                const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(i) + v - pad;
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(L)) continue;
                acc += xb[s] * k[v];
            }
            yb[i] = acc;
        }
    });
}

template <typename T>
void conv1d_bwd_input(const T* k, const T* gy, T* gx, std::size_t B, std::size_t L,
                      std::size_t kw) {
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kw) / 2;
    parallel_for(B, [=](std::size_t b) {
        const T* gb = gy + b * L;
        T* xb = gx + b * L;
        for (std::size_t i = 0; i < L; ++i) {
            T acc = T(0);
            for (std::size_t v = 0; v < kw; ++v) {
                const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(i) + pad - v;
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(L)) continue;
                acc += gb[s] * k[v];
            }
            xb[i] += acc;
        }
    });
}

template <typename T>
void conv1d_bwd_kernel(const T* x, const T* gy, T* gk, std::size_t B, std::size_t L,
                       std::size_t kw) {
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kw) / 2;
    for (std::size_t v = 0; v < kw; ++v) {
        T acc = T(0);
        for (std::size_t b = 0; b < B; ++b) {
            const T* xb = x + b * L;
            const T* gb = gy + b * L;
            for (std::size_t i = 0; i < L; ++i) {
                const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(i) + v - pad;
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(L)) continue;
                acc += gb[i] * xb[s];
            }
        }
        gk[v] += acc;
    }
}

// ---- patching / upsampling ----

template <typename T>
void extract_patches(const T* img, T* out, std::size_t B, std::size_t C, std::size_t H,
                     std::size_t W, std::size_t p) {
    const std::size_t hp = H / p, wp = W / p, n = hp * wp, plen = C * p * p;
    parallel_for(B * n, [=](std::size_t idx) {
        const std::size_t b = idx / n, patch = idx % n;
        const std::size_t py = patch / wp, px = patch % wp;
        T* dst = out + idx * plen;
        for (std::size_t c = 0; c < C; ++c) {
            const T* src = img + ((b * C + c) * H + py * p) * W + px * p;
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < p; ++j) *dst++ = src[i * W + j];
        }
    });
}

template <typename T>
void extract_patches_bwd(const T* g, T* gimg, std::size_t B, std::size_t C, std::size_t H,
                         std::size_t W, std::size_t p) {
    const std::size_t hp = H / p, wp = W / p, n = hp * wp, plen = C * p * p;
    parallel_for(B * n, [=](std::size_t idx) {
        const std::size_t b = idx / n, patch = idx % n;
        const std::size_t py = patch / wp, px = patch % wp;
        const T* src = g + idx * plen;
        for (std::size_t c = 0; c < C; ++c) {
            T* dst = gimg + ((b * C + c) * H + py * p) * W + px * p;
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < p; ++j) dst[i * W + j] += *src++;
        }
    });
}

template <typename T>
void upsample_conv(const T* x, const T* k, const T* bias, T* y, std::size_t B,
                   std::size_t Cin, std::size_t Cout, std::size_t H, std::size_t W,
                   std::size_t f) {
    const std::size_t Ho = H * f, Wo = W * f;
    parallel_for(B * Cout, [=](std::size_t bc) {
        const std::size_t b = bc / Cout, co = bc % Cout;
        T* yp = y + bc * Ho * Wo;
        for (std::size_t i = 0; i < H; ++i) {
            for (std::size_t j = 0; j < W; ++j) {
                for (std::size_t dy = 0; dy < f; ++dy) {
                    for (std::size_t dx = 0; dx < f; ++dx) {
                        T acc = bias ? bias[co] : T(0);
                        for (std::size_t ci = 0; ci < Cin; ++ci) {
                            acc += x[((b * Cin + ci) * H + i) * W + j] *
                                   k[((ci * Cout + co) * f + dy) * f + dx];
                        }
                        yp[(i * f + dy) * Wo + (j * f + dx)] = acc;
                    }
                }
            }
        }
    });
}

template <typename T>
void upsample_conv_bwd_input(const T* k, const T* gy, T* gx, std::size_t B,
                             std::size_t Cin, std::size_t Cout, std::size_t H,
                             std::size_t W, std::size_t f) {
    const std::size_t Ho = H * f, Wo = W * f;
    parallel_for(B * Cin, [=](std::size_t bc) {
        const std::size_t b = bc / Cin, ci = bc % Cin;
        T* xp = gx + bc * H * W;
        for (std::size_t i = 0; i < H; ++i) {
            for (std::size_t j = 0; j < W; ++j) {
                T acc = T(0);
                for (std::size_t co = 0; co < Cout; ++co) {
                    const T* gp = gy + (b * Cout + co) * Ho * Wo;
                    for (std::size_t dy = 0; dy < f; ++dy)
                        for (std::size_t dx = 0; dx < f; ++dx)
                            acc += gp[(i * f + dy) * Wo + (j * f + dx)] *
                                   k[((ci * Cout + co) * f + dy) * f + dx];
                }
                xp[i * W + j] += acc;
            }
        }
    });
}

template <typename T>
void upsample_conv_bwd_kernel(const T* x, const T* gy, T* gk, std::size_t B,
                              std::size_t Cin, std::size_t Cout, std::size_t H,
                              std::size_t W, std::size_t f) {
    const std::size_t Ho = H * f, Wo = W * f;
    parallel_for(Cin * Cout, [=](std::size_t cc) {
        const std::size_t ci = cc / Cout, co = cc % Cout;
        T* kp = gk + cc * f * f;
        for (std::size_t dy = 0; dy < f; ++dy) {
            for (std::size_t dx = 0; dx < f; ++dx) {
                T acc = T(0);
                for (std::size_t b = 0; b < B; ++b) {
                    const T* xp = x + (b * Cin + ci) * H * W;
                    const T* gp = gy + (b * Cout + co) * Ho * Wo;
                    for (std::size_t i = 0; i < H; ++i)
                        for (std::size_t j = 0; j < W; ++j)
                            acc += xp[i * W + j] * gp[(i * f + dy) * Wo + (j * f + dx)];
                }
                kp[dy * f + dx] += acc;
            }
        }
    });
}

template <typename T>
void upsample_conv_bwd_bias(const T* gy, T* gbias, std::size_t B, std::size_t Cout,
                            std::size_t HW) {
    parallel_for(Cout, [=](std::size_t co) {
        T acc = T(0);
        for (std::size_t b = 0; b < B; ++b) {
            const T* gp = gy + (b * Cout + co) * HW;
            for (std::size_t i = 0; i < HW; ++i) acc += gp[i];
        }
        gbias[co] += acc;
    });
}

// ---- elementwise ----

template <typename T>
void sigmoid_map(const T* x, T* y, std::size_t n) {
    parallel_for(n, [=](std::size_t i) { y[i] = T(1) / (T(1) + std::exp(-x[i])); });
}

template <typename T>
void sigmoid_bwd(const T* y, const T* gy, T* gx, std::size_t n) {
    parallel_for(n, [=](std::size_t i) { gx[i] = gy[i] * y[i] * (T(1) - y[i]); });
}

template <typename T>
void gelu_map(const T* x, T* y, std::size_t n) {
    constexpr T inv_sqrt2 = T(0.70710678118654752440);
    parallel_for(n, [=](std::size_t i) {
        y[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * inv_sqrt2));
    });
}

template <typename T>
void gelu_bwd(const T* x, const T* gy, T* gx, std::size_t n) {
    constexpr T inv_sqrt2 = T(0.70710678118654752440);
    constexpr T inv_sqrt2pi = T(0.39894228040143267794);
    parallel_for(n, [=](std::size_t i) {
        const T cdf = T(0.5) * (T(1) + std::erf(x[i] * inv_sqrt2));
        const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x[i] * x[i]);
        gx[i] = gy[i] * (cdf + x[i] * pdf);
    });
}

template <typename T>
void abs_map(const T* x, T* y, std::size_t n) {
    parallel_for(n, [=](std::size_t i) { y[i] = std::abs(x[i]); });
}

template <typename T>
void abs_bwd(const T* x, const T* gy, T* gx, std::size_t n) {
    parallel_for(n, [=](std::size_t i) {
        gx[i] = x[i] > T(0) ? gy[i] : (x[i] < T(0) ? -gy[i] : T(0));
    });
}

template <typename T>
void affine_map(const T* x, T mul, T add, T* y, std::size_t n) {
    parallel_for(n, [=](std::size_t i) { y[i] = mul * x[i] + add; });
}

template <typename T>
void binary_same(BinaryOp op, const T* a, const T* b, T* y, std::size_t n) {
    switch (op) {
        case BinaryOp::add:
            parallel_for(n, [=](std::size_t i) { y[i] = a[i] + b[i]; });
            break;
        case BinaryOp::sub:
            parallel_for(n, [=](std::size_t i) { y[i] = a[i] - b[i]; });
            break;
        case BinaryOp::mul:
            parallel_for(n, [=](std::size_t i) { y[i] = a[i] * b[i]; });
            break;
    }
}

template <typename T>
void binary_bcast(BinaryOp op, const T* a, const std::size_t* astride, const T* b,
                  const std::size_t* bstride, T* y, const std::size_t* oshape,
                  std::size_t ndim) {
    std::size_t total = 1;
    for (std::size_t d = 0; d < ndim; ++d) total *= oshape[d];
    parallel_for(total, [=](std::size_t idx) {
        std::size_t rem = idx, ao = 0, bo = 0;
        for (std::size_t d = ndim; d-- > 0;) {
            const std::size_t coord = rem % oshape[d];
            rem /= oshape[d];
            ao += coord * astride[d];
            bo += coord * bstride[d];
        }
        switch (op) {
            case BinaryOp::add: y[idx] = a[ao] + b[bo]; break;
            case BinaryOp::sub: y[idx] = a[ao] - b[bo]; break;
            case BinaryOp::mul: y[idx] = a[ao] * b[bo]; break;
        }
    });
}

template <typename T>
void accumulate(const T* x, T* y, std::size_t n) {
    parallel_for(n, [=](std::size_t i) { y[i] += x[i]; });
}

template <typename T>
void reduce_sum_mid(const T* x, T* y, std::size_t outer, std::size_t axis_n,
                    std::size_t inner) {
    parallel_for(outer * inner, [=](std::size_t oi) {
        const std::size_t o = oi / inner, i = oi % inner;
        T acc = T(0);
        for (std::size_t k = 0; k < axis_n; ++k) acc += x[(o * axis_n + k) * inner + i];
        y[oi] = acc;
    });
}

template <typename T>
bool all_finite(const T* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

// Explicit instantiations for the two supported scalar types.
#define MEMROUTE_INSTANTIATE_KERNELS(T)                                                     \
    template void matmul<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, \
                            std::size_t, bool);                                             \
    template void matmul_nt<T>(const T*, const T*, T*, std::size_t, std::size_t,           \
                               std::size_t, std::size_t, bool);                             \
    template void matmul_tn<T>(const T*, const T*, T*, std::size_t, std::size_t,           \
                               std::size_t, std::size_t, bool);                             \
    template void softmax_rows<T>(const T*, T*, std::size_t, std::size_t);                  \
    template void softmax_bwd_rows<T>(const T*, const T*, T*, std::size_t, std::size_t);    \
    template void log_softmax_rows<T>(const T*, T*, std::size_t, std::size_t);              \
    template void log_softmax_bwd_rows<T>(const T*, const T*, T*, std::size_t,              \
                                          std::size_t);                                     \
    template void layer_norm_rows<T>(const T*, const T*, const T*, T, T*, T*, T*,           \
                                     std::size_t, std::size_t);                             \
    template void layer_norm_bwd_rows<T>(const T*, const T*, const T*, const T*, T*, T*,    \
                                         T*, std::size_t, std::size_t);                     \
    template void dwconv2d<T>(const T*, const T*, T*, std::size_t, std::size_t,             \
                              std::size_t, std::size_t, std::size_t, std::size_t);          \
    template void dwconv2d_bwd_input<T>(const T*, const T*, T*, std::size_t, std::size_t,   \
                                        std::size_t, std::size_t, std::size_t,              \
                                        std::size_t);                                       \
    template void dwconv2d_bwd_kernel<T>(const T*, const T*, T*, std::size_t, std::size_t,  \
                                         std::size_t, std::size_t, std::size_t,             \
                                         std::size_t);                                      \
    template void conv1d_same<T>(const T*, const T*, T*, std::size_t, std::size_t,          \
                                 std::size_t);                                              \
    template void conv1d_bwd_input<T>(const T*, const T*, T*, std::size_t, std::size_t,     \
                                      std::size_t);                                         \
    template void conv1d_bwd_kernel<T>(const T*, const T*, T*, std::size_t, std::size_t,    \
                                       std::size_t);                                        \
    template void extract_patches<T>(const T*, T*, std::size_t, std::size_t, std::size_t,   \
                                     std::size_t, std::size_t);                             \
    template void extract_patches_bwd<T>(const T*, T*, std::size_t, std::size_t,            \
                                         std::size_t, std::size_t, std::size_t);            \
    template void upsample_conv<T>(const T*, const T*, const T*, T*, std::size_t,           \
                                   std::size_t, std::size_t, std::size_t, std::size_t,      \
                                   std::size_t);                                            \
    template void upsample_conv_bwd_input<T>(const T*, const T*, T*, std::size_t,           \
                                             std::size_t, std::size_t, std::size_t,         \
                                             std::size_t, std::size_t);                     \
    template void upsample_conv_bwd_kernel<T>(const T*, const T*, T*, std::size_t,          \
                                              std::size_t, std::size_t, std::size_t,        \
                                              std::size_t, std::size_t);                    \
    template void upsample_conv_bwd_bias<T>(const T*, T*, std::size_t, std::size_t,         \
                                            std::size_t);                                   \
    template void sigmoid_map<T>(const T*, T*, std::size_t);                                \
    template void sigmoid_bwd<T>(const T*, const T*, T*, std::size_t);                      \
    template void gelu_map<T>(const T*, T*, std::size_t);                                   \
    template void gelu_bwd<T>(const T*, const T*, T*, std::size_t);                         \
    template void abs_map<T>(const T*, T*, std::size_t);                                    \
    template void abs_bwd<T>(const T*, const T*, T*, std::size_t);                          \
    template void affine_map<T>(const T*, T, T, T*, std::size_t);                           \
    template void binary_same<T>(BinaryOp, const T*, const T*, T*, std::size_t);            \
    template void binary_bcast<T>(BinaryOp, const T*, const std::size_t*, const T*,         \
                                  const std::size_t*, T*, const std::size_t*,               \
                                  std::size_t);                                             \
    template void accumulate<T>(const T*, T*, std::size_t);                                 \
    template void reduce_sum_mid<T>(const T*, T*, std::size_t, std::size_t, std::size_t);   \
    template bool all_finite<T>(const T*, std::size_t);

MEMROUTE_INSTANTIATE_KERNELS(float)
MEMROUTE_INSTANTIATE_KERNELS(double)

#undef MEMROUTE_INSTANTIATE_KERNELS

}  // namespace memroute::kernels
