#include "memroute/reference.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace memroute::ref {

void matmul(const double* a, const double* b, double* c, std::size_t n, std::size_t m,
            std::size_t p) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m; ++k) acc += a[i * m + k] * b[k * p + j];
            c[i * p + j] = acc;
        }
    }
}

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            y[r * cols + c] = std::exp(x[r * cols + c]);
            sum += y[r * cols + c];
        }
        for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] /= sum;
    }
}

void log_softmax_rows(const double* x, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) sum += std::exp(x[r * cols + c]);
        const double lse = std::log(sum);
        for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = x[r * cols + c] - lse;
    }
}

void layer_norm_rows(const double* x, const double* gain, const double* bias, double eps,
                     double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mean += x[r * cols + c];
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double d = x[r * cols + c] - mean;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        for (std::size_t c = 0; c < cols; ++c)
            y[r * cols + c] =
                gain[c] * (x[r * cols + c] - mean) / std::sqrt(var + eps) + bias[c];
    }
}

void dwconv2d(const double* x, const double* k, double* y, std::size_t B, std::size_t C,
              std::size_t H, std::size_t W, std::size_t kh, std::size_t kw) {
    const long ph = static_cast<long>(kh) / 2, pw = static_cast<long>(kw) / 2;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < H; ++i)
                for (std::size_t j = 0; j < W; ++j) {
                    double acc = 0.0;
                    for (std::size_t u = 0; u < kh; ++u)
                        for (std::size_t v = 0; v < kw; ++v) {
                            const long si = static_cast<long>(i) + static_cast<long>(u) - ph;
                            const long sj = static_cast<long>(j) + static_cast<long>(v) - pw;
                            if (si < 0 || si >= static_cast<long>(H) || sj < 0 ||
                                sj >= static_cast<long>(W))
                                continue;
                            acc += x[((b * C + c) * H + si) * W + sj] * k[(c * kh + u) * kw + v];
                        }
                    y[((b * C + c) * H + i) * W + j] = acc;
                }
}

void conv1d_same(const double* x, const double* k, double* y, std::size_t B, std::size_t L,
                 std::size_t kw) {
    const long pad = static_cast<long>(kw) / 2;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < L; ++i) {
            double acc = 0.0;
            for (std::size_t v = 0; v < kw; ++v) {
                const long s = static_cast<long>(i) + static_cast<long>(v) - pad;
                if (s < 0 || s >= static_cast<long>(L)) continue;
                acc += x[b * L + s] * k[v];
            }
            y[b * L + i] = acc;
        }
}

void attention(const double* x, const double* wq, const double* wk, const double* wv,
               const double* wo, std::size_t n, std::size_t d_model, std::size_t heads,
               double* out) {
    const std::size_t hd = d_model / heads;
    std::vector<double> q(n * d_model), k(n * d_model), v(n * d_model), ctx(n * d_model);
    matmul(x, wq, q.data(), n, d_model, d_model);
    matmul(x, wk, k.data(), n, d_model, d_model);
    matmul(x, wv, v.data(), n, d_model, d_model);
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<double> scores(n), probs(n);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * hd;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < hd; ++c)
                    s += q[i * d_model + off + c] * k[j * d_model + off + c];
                scores[j] = s * scale;
            }
            double mx = scores[0];
            for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, scores[j]);
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                probs[j] = std::exp(scores[j] - mx);
                sum += probs[j];
            }
            for (std::size_t j = 0; j < n; ++j) probs[j] /= sum;
            for (std::size_t c = 0; c < hd; ++c) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    acc += probs[j] * v[j * d_model + off + c];
                ctx[i * d_model + off + c] = acc;
            }
        }
    }
    matmul(ctx.data(), wo, out, n, d_model, d_model);
}

void router_log_probs(const double* x, const double* ln_gain, const double* ln_bias,
                      const double* w1, const double* b1, const double* w2,
                      const double* b2, std::size_t n, std::size_t d, double eps,
                      double* log_p) {
    const std::size_t half = d / 2;
    std::vector<double> normed(n * d), z(n * d);
    layer_norm_rows(x, ln_gain, ln_bias, eps, normed.data(), n, d);
    matmul(normed.data(), w1, z.data(), n, d, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) z[i * d + c] += b1[c];
    std::vector<double> zg(half, 0.0);
    for (std::size_t c = 0; c < half; ++c) {
        for (std::size_t i = 0; i < n; ++i) zg[c] += z[i * d + half + c];
        zg[c] /= static_cast<double>(n);
    }
    std::vector<double> zcat(n * d), logits(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < half; ++c) {
            zcat[i * d + c] = z[i * d + c];
            zcat[i * d + half + c] = zg[c];
        }
    }
    matmul(zcat.data(), w2, logits.data(), n, d, 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 2; ++c) logits[i * 2 + c] += b2[c];
    log_softmax_rows(logits.data(), log_p, n, 2);
}

void ltrm(const double* x, const double* w1, const double* b1, const double* dw,
          const double* w2, const double* b2, const double* eca, std::size_t eca_k,
          std::size_t hp, std::size_t wp, std::size_t d, double* out) {
    const std::size_t n = hp * wp;
    std::vector<double> t1(n * d);
    matmul(x, w1, t1.data(), n, d, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) t1[i * d + c] += b1[c];
    // tokens -> [D, hp, wp] grid, depthwise 3x3, back to tokens
    std::vector<double> grid(d * n), conv(d * n), t2tok(n * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) grid[c * n + i] = t1[i * d + c];
    dwconv2d(grid.data(), dw, conv.data(), 1, d, hp, wp, 3, 3);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) t2tok[i * d + c] = conv[c * n + i];
    std::vector<double> y(n * d);
    matmul(t2tok.data(), w2, y.data(), n, d, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) y[i * d + c] += b2[c];
    // channel gate: sigmoid(conv1d over per-channel means)
    std::vector<double> desc(d, 0.0), gatec(d);
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t i = 0; i < n; ++i) desc[c] += y[i * d + c];
        desc[c] /= static_cast<double>(n);
    }
    conv1d_same(desc.data(), eca, gatec.data(), 1, d, eca_k);
    for (std::size_t c = 0; c < d; ++c) gatec[c] = 1.0 / (1.0 + std::exp(-gatec[c]));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) out[i * d + c] = y[i * d + c] * gatec[c];
}

}  // namespace memroute::ref
