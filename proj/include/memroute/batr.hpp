#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "memroute/rng.hpp"
#include "memroute/tensor.hpp"

namespace memroute {

// Batch-constrained adaptive token routing: hard branch decisions from the
// router's log-probabilities. Training uses hard Gumbel-Softmax with a
// straight-through gradient; inference uses argmax with an optional top-k cap.

struct RoutingConfig {
    double rho = 0.25;                       // target compression degree in [0,1]
    double tau = 1.0;                        // Gumbel-Softmax temperature
    std::optional<std::size_t> max_tokens;   // inference top-k cap
    void validate() const;
};

// Gumbel(0,1) noise tensor; kept separate from decide_train so tests can
// freeze it.
template <typename T>
Tensor<T> sample_gumbel(const Shape& shape, Rng& rng);

template <typename T>
struct TrainDecision {
    std::vector<std::uint8_t> delta;  // B*N, 1 = attention branch
    Tensor<T> soft;                   // [B,N,2] relaxed sample, differentiable
    Tensor<T> st;                     // [B,N,2] hard forward / soft backward
};

// soft = softmax((log_p + g)/tau); delta = argmax(soft); st passes the hard
// one-hot forward and the relaxed gradient backward. delta always equals the
// argmax of the soft sample.
template <typename T>
TrainDecision<T> decide_train(const Tensor<T>& log_p, double tau, const Tensor<T>& noise);

template <typename T>
TrainDecision<T> decide_train(const Tensor<T>& log_p, double tau, Rng& rng);

// Deterministic argmax over the two classes; exact ties resolve to class 0
// (the cheaper branch).
template <typename T>
std::vector<std::uint8_t> decide_infer(const Tensor<T>& log_p);

// Exact mean of a binary decision tensor (any shape); errors on non-binary
// values.
template <typename T>
double compute_gamma(const Tensor<T>& delta);
double compute_gamma(const std::vector<std::uint8_t>& delta);

// Per-sample top-k cap: if more than k tokens of a sample are routed to
// attention, keep the k with the highest attention log-probability
// (ties keep the lower token index) and flip the rest. log_p is [B,N,2],
// delta is B*N row-major.
template <typename T>
std::vector<std::uint8_t> apply_topk_cap(const Tensor<T>& log_p,
                                         const std::vector<std::uint8_t>& delta,
                                         std::size_t k);

}  // namespace memroute
