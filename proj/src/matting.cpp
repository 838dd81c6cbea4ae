#include "memroute/matting.hpp"

#include <algorithm>
#include <cmath>

#include "memroute/ops.hpp"

namespace memroute {

template <typename T>
Tensor<T> composite(const Tensor<T>& fg, const Tensor<T>& bg, const Tensor<T>& alpha) {
    if (fg.shape() != bg.shape())
        throw ShapeError("composite: fg " + shape_str(fg.shape()) + " vs bg " +
                         shape_str(bg.shape()));
    if (fg.ndim() != 3 || alpha.ndim() != 2 || alpha.dim(0) != fg.dim(1) ||
        alpha.dim(1) != fg.dim(2))
        throw ShapeError("composite: expected fg/bg [C,H,W] with alpha [H,W], got " +
                         shape_str(fg.shape()) + " and " + shape_str(alpha.shape()));
    for (T a : alpha.data())
        if (a < T(0) || a > T(1))
            throw NumericError("composite: alpha value outside [0,1]");
    auto a3 = ops::reshape(alpha, {std::size_t(1), alpha.dim(0), alpha.dim(1)});
    auto one_minus = ops::affine(a3, T(-1), T(1));
    return ops::add(ops::mul(a3, fg), ops::mul(one_minus, bg));
}

namespace {

// Smooth noise in [0,1]: a coarse random lattice bilinearly upsampled.
template <typename T>
Tensor<T> smooth_noise(Rng& rng, std::size_t channels, std::size_t size,
                       std::size_t lattice) {
    Tensor<T> out = Tensor<T>::zeros({channels, size, size});
    std::vector<double> grid((lattice + 1) * (lattice + 1));
    auto v = out.mut_data();
    for (std::size_t c = 0; c < channels; ++c) {
        for (double& g : grid) g = rng.uniform();
        for (std::size_t y = 0; y < size; ++y) {
            const double fy = static_cast<double>(y) / size * lattice;
            const std::size_t y0 = static_cast<std::size_t>(fy);
            const double ty = fy - y0;
            for (std::size_t x = 0; x < size; ++x) {
                const double fx = static_cast<double>(x) / size * lattice;
                const std::size_t x0 = static_cast<std::size_t>(fx);
                const double tx = fx - x0;
                const double g00 = grid[y0 * (lattice + 1) + x0];
                const double g01 = grid[y0 * (lattice + 1) + x0 + 1];
                const double g10 = grid[(y0 + 1) * (lattice + 1) + x0];
                const double g11 = grid[(y0 + 1) * (lattice + 1) + x0 + 1];
                const double val = g00 * (1 - ty) * (1 - tx) + g01 * (1 - ty) * tx +
                                   g10 * ty * (1 - tx) + g11 * ty * tx;
                v[(c * size + y) * size + x] = static_cast<T>(val);
            }
        }
    }
    return out;
}

inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

template <typename T>
Tensor<T> easy_alpha(Rng& rng, std::size_t size) {
    Tensor<T> alpha = Tensor<T>::zeros({size, size});
    auto v = alpha.mut_data();
    const double s = static_cast<double>(size);
    if (rng.randint(2) == 0) {
        // anti-aliased disk: interior exactly 1, one-pixel-wide soft rim
        const double cx = rng.uniform(0.3, 0.7) * s, cy = rng.uniform(0.3, 0.7) * s;
        const double r = rng.uniform(0.2, 0.4) * s, w = 1.0;
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
                v[y * size + x] = static_cast<T>(clamp01((r - d) / (2.0 * w) + 0.5));
            }
    } else {
        // convex polygon via max over half-plane signed distances
        const std::size_t sides = 3 + rng.randint(4);
        const double cx = rng.uniform(0.35, 0.65) * s, cy = rng.uniform(0.35, 0.65) * s;
        const double r = rng.uniform(0.2, 0.35) * s;
        std::vector<double> nx(sides), ny(sides), off(sides);
        const double rot = rng.uniform() * 6.28318530717958648;
        for (std::size_t i = 0; i < sides; ++i) {
            const double a = rot + 6.28318530717958648 * i / sides;
            nx[i] = std::cos(a);
            ny[i] = std::sin(a);
            off[i] = r * rng.uniform(0.8, 1.0);
        }
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                double sd = -1e30;
                for (std::size_t i = 0; i < sides; ++i)
                    sd = std::max(sd, (x + 0.5 - cx) * nx[i] + (y + 0.5 - cy) * ny[i] -
                                          off[i]);
                v[y * size + x] = static_cast<T>(clamp01(-sd / 2.0 + 0.5));
            }
    }
    return alpha;
}

template <typename T>
Tensor<T> hard_alpha(Rng& rng, std::size_t size) {
    Tensor<T> alpha = Tensor<T>::zeros({size, size});
    auto v = alpha.mut_data();
    const double s = static_cast<double>(size);
    const std::uint64_t kind = rng.randint(3);
    if (kind == 0) {
        // linear gradient with saturated ends and a wide fractional band
        const double ang = rng.uniform() * 6.28318530717958648;
        const double nx = std::cos(ang), ny = std::sin(ang);
        const double width = rng.uniform(0.3, 0.7) * s;
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                const double t = (x - s / 2) * nx + (y - s / 2) * ny;
                v[y * size + x] = static_cast<T>(clamp01(t / width + 0.5));
            }
    } else if (kind == 1) {
        // radial gradient
        const double cx = rng.uniform(0.3, 0.7) * s, cy = rng.uniform(0.3, 0.7) * s;
        const double r0 = rng.uniform(0.1, 0.2) * s, r1 = rng.uniform(0.35, 0.5) * s;
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
                v[y * size + x] = static_cast<T>(clamp01((r1 - d) / (r1 - r0)));
            }
    } else {
        // soft-edged blobs: clamped sum of gaussians
        const std::size_t blobs = 2 + rng.randint(3);
        std::vector<double> bx(blobs), by(blobs), br(blobs);
        for (std::size_t i = 0; i < blobs; ++i) {
            bx[i] = rng.uniform(0.2, 0.8) * s;
            by[i] = rng.uniform(0.2, 0.8) * s;
            br[i] = rng.uniform(0.1, 0.25) * s;
        }
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                double acc = 0.0;
                for (std::size_t i = 0; i < blobs; ++i) {
                    const double d2 = (x + 0.5 - bx[i]) * (x + 0.5 - bx[i]) +
                                      (y + 0.5 - by[i]) * (y + 0.5 - by[i]);
                    acc += 1.3 * std::exp(-d2 / (2.0 * br[i] * br[i]));
                }
                v[y * size + x] = static_cast<T>(clamp01(acc));
            }
    }
    return alpha;
}

}  // namespace

template <typename T>
CompositeSample<T> gen_toy_sample(Rng& rng, std::size_t size, Difficulty difficulty) {
    CompositeSample<T> s;
    s.fg = smooth_noise<T>(rng, 3, size, 4);
    s.bg = smooth_noise<T>(rng, 3, size, 6);
    s.alpha = difficulty == Difficulty::easy ? easy_alpha<T>(rng, size)
                                             : hard_alpha<T>(rng, size);
    s.image = composite(s.fg, s.bg, s.alpha);
    return s;
}

template <typename T>
Tensor<T> distill_loss(const Tensor<T>& teacher, const Tensor<T>& student,
                       bool per_channel_mean) {
    if (teacher.shape() != student.shape())
        throw ShapeError("distill_loss: teacher " + shape_str(teacher.shape()) +
                         " vs student " + shape_str(student.shape()));
    auto diff = ops::sub(student, ops::detach(teacher));
    auto loss = ops::mean_all(ops::square(diff));
    if (!per_channel_mean)
        loss = ops::affine(loss, static_cast<T>(teacher.shape().back()), T(0));
    return loss;
}

template <typename T>
Tensor<T> compress_loss(const Tensor<T>& gamma_soft, double rho) {
    if (rho < 0.0 || rho > 1.0)
        throw ConfigError("compress_loss: rho must be in [0,1]");
    auto diff = ops::affine(gamma_soft, T(-1), static_cast<T>(rho));  // rho - gamma
    return ops::square(diff);
}

template <typename T>
Tensor<T> matting_loss(const Tensor<T>& pred_alpha, const Tensor<T>& true_alpha) {
    if (pred_alpha.shape() != true_alpha.shape())
        throw ShapeError("matting_loss: pred " + shape_str(pred_alpha.shape()) + " vs true " +
                         shape_str(true_alpha.shape()));
    return ops::mean_all(ops::abs(ops::sub(pred_alpha, true_alpha)));
}

template <typename T>
std::pair<double, double> metrics_sad_mse(const Tensor<T>& pred, const Tensor<T>& truth) {
    if (pred.shape() != truth.shape())
        throw ShapeError("metrics: shape mismatch " + shape_str(pred.shape()) + " vs " +
                         shape_str(truth.shape()));
    double sad = 0.0, sq = 0.0;
    const auto p = pred.data();
    const auto t = truth.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
        sad += std::abs(d);
        sq += d * d;
    }
    return {sad, 1000.0 * sq / static_cast<double>(p.size())};
}

#define MEMROUTE_INSTANTIATE_MATTING(T)                                                  \
    template struct CompositeSample<T>;                                                  \
    template Tensor<T> composite<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
    template CompositeSample<T> gen_toy_sample<T>(Rng&, std::size_t, Difficulty);        \
    template Tensor<T> distill_loss<T>(const Tensor<T>&, const Tensor<T>&, bool);        \
    template Tensor<T> compress_loss<T>(const Tensor<T>&, double);                       \
    template Tensor<T> matting_loss<T>(const Tensor<T>&, const Tensor<T>&);              \
    template std::pair<double, double> metrics_sad_mse<T>(const Tensor<T>&,              \
                                                          const Tensor<T>&);

MEMROUTE_INSTANTIATE_MATTING(float)
MEMROUTE_INSTANTIATE_MATTING(double)

#undef MEMROUTE_INSTANTIATE_MATTING

}  // namespace memroute
