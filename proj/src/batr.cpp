#include "memroute/batr.hpp"

#include <algorithm>
#include <numeric>

#include "memroute/ops.hpp"

namespace memroute {

void RoutingConfig::validate() const {
    if (rho < 0.0 || rho > 1.0)
        throw ConfigError("routing: rho must be in [0,1], got " + std::to_string(rho));
    if (tau <= 0.0)
        throw ConfigError("routing: tau must be > 0, got " + std::to_string(tau));
}

template <typename T>
Tensor<T> sample_gumbel(const Shape& shape, Rng& rng) {
    Tensor<T> g = Tensor<T>::zeros(shape);
    for (T& v : g.mut_data()) v = static_cast<T>(rng.gumbel());
    return g;
}

namespace {

template <typename T>
void check_two_classes(const Tensor<T>& log_p, const char* op) {
    if (log_p.ndim() < 1 || log_p.shape().back() != 2)
        throw ShapeError(std::string(op) + ": expected trailing class axis of 2, got " +
                         shape_str(log_p.shape()));
}

}  // namespace

template <typename T>
TrainDecision<T> decide_train(const Tensor<T>& log_p, double tau, const Tensor<T>& noise) {
    check_two_classes(log_p, "decide_train");
    if (tau <= 0.0)
        throw ConfigError("decide_train: tau must be > 0, got " + std::to_string(tau));
    if (noise.shape() != log_p.shape())
        throw ShapeError("decide_train: noise shape " + shape_str(noise.shape()) +
                         " must match log_p " + shape_str(log_p.shape()));
    TrainDecision<T> out;
    auto perturbed = ops::affine(ops::add(log_p, noise), T(1.0 / tau), T(0));
    out.soft = ops::softmax(perturbed, -1);
    const std::size_t pairs = out.soft.size() / 2;
    Tensor<T> hard = Tensor<T>::zeros(out.soft.shape());
    out.delta.resize(pairs);
    auto hv = hard.mut_data();
    const auto sv = out.soft.data();
    for (std::size_t i = 0; i < pairs; ++i) {
        const bool attn = sv[2 * i + 1] > sv[2 * i];
        out.delta[i] = attn ? 1 : 0;
        hv[2 * i + (attn ? 1 : 0)] = T(1);
    }
    out.st = ops::straight_through(out.soft, hard);
    return out;
}

template <typename T>
TrainDecision<T> decide_train(const Tensor<T>& log_p, double tau, Rng& rng) {
    Tensor<T> noise = sample_gumbel<T>(log_p.shape(), rng);
    return decide_train(log_p, tau, noise);
}

template <typename T>
std::vector<std::uint8_t> decide_infer(const Tensor<T>& log_p) {
    check_two_classes(log_p, "decide_infer");
    const std::size_t pairs = log_p.size() / 2;
    std::vector<std::uint8_t> delta(pairs);
    const auto v = log_p.data();
    for (std::size_t i = 0; i < pairs; ++i) delta[i] = v[2 * i + 1] > v[2 * i] ? 1 : 0;
    return delta;
}

double compute_gamma(const std::vector<std::uint8_t>& delta) {
    if (delta.empty()) return 0.0;
    std::size_t ones = 0;
    for (std::uint8_t d : delta) ones += d;
    return static_cast<double>(ones) / static_cast<double>(delta.size());
}

template <typename T>
double compute_gamma(const Tensor<T>& delta) {
    std::size_t ones = 0;
    for (T v : delta.data()) {
        if (v == T(1))
            ++ones;
        else if (v != T(0))
            throw NumericError("compute_gamma: decision tensor must be binary");
    }
    return delta.size() == 0 ? 0.0
                             : static_cast<double>(ones) / static_cast<double>(delta.size());
}

template <typename T>
std::vector<std::uint8_t> apply_topk_cap(const Tensor<T>& log_p,
                                         const std::vector<std::uint8_t>& delta,
                                         std::size_t k) {
    check_two_classes(log_p, "apply_topk_cap");
    const std::size_t B = log_p.ndim() == 3 ? log_p.dim(0) : 1;
    const std::size_t N = log_p.size() / 2 / B;
    if (delta.size() != B * N)
        throw ShapeError("apply_topk_cap: delta length does not match log_p");
    std::vector<std::uint8_t> capped = delta;
    const auto v = log_p.data();
    for (std::size_t b = 0; b < B; ++b) {
        std::vector<std::size_t> selected;
        for (std::size_t i = 0; i < N; ++i)
            if (delta[b * N + i]) selected.push_back(i);
        if (selected.size() <= k) continue;
        std::sort(selected.begin(), selected.end(), [&](std::size_t x, std::size_t y) {
            const T px = v[(b * N + x) * 2 + 1], py = v[(b * N + y) * 2 + 1];
            if (px != py) return px > py;
            return x < y;
        });
        for (std::size_t j = k; j < selected.size(); ++j) capped[b * N + selected[j]] = 0;
    }
    return capped;
}

#define MEMROUTE_INSTANTIATE_BATR(T)                                                    \
    template Tensor<T> sample_gumbel<T>(const Shape&, Rng&);                            \
    template struct TrainDecision<T>;                                                   \
    template TrainDecision<T> decide_train<T>(const Tensor<T>&, double, const Tensor<T>&); \
    template TrainDecision<T> decide_train<T>(const Tensor<T>&, double, Rng&);          \
    template std::vector<std::uint8_t> decide_infer<T>(const Tensor<T>&);               \
    template double compute_gamma<T>(const Tensor<T>&);                                 \
    template std::vector<std::uint8_t> apply_topk_cap<T>(                               \
        const Tensor<T>&, const std::vector<std::uint8_t>&, std::size_t);

MEMROUTE_INSTANTIATE_BATR(float)
MEMROUTE_INSTANTIATE_BATR(double)

#undef MEMROUTE_INSTANTIATE_BATR

}  // namespace memroute
