#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include "memroute/checkpoint.hpp"
#include "memroute/dataset.hpp"

namespace memroute {

template <typename T>
class Optimizer {
public:
    Optimizer(OptimConfig cfg, std::vector<Tensor<T>> params);
    void step();
    void zero_grad();

private:
    OptimConfig cfg_;
    std::vector<Tensor<T>> params_;
    std::vector<std::vector<T>> m_, v_;
    std::size_t t_ = 0;
};

template <typename T>
std::vector<Tensor<T>> trainable_params(ModelWeights<T>& w);

struct StepLog {
    std::size_t step = 0;
    double matting = 0, distill = 0, compress = 0, total = 0, gamma_hard = 0;
};

// Matting-only pretraining of the routing-free model (the distillation
// teacher). Deterministic in (weights, data, seed).
template <typename T>
void train_teacher(ModelWeights<T>& teacher, const RunConfig& cfg,
                   const std::vector<LoadedSample<T>>& data, std::size_t steps, Rng rng);

template <typename T>
using StepCallback = std::function<void(std::size_t /*completed steps*/)>;

// Student training against a frozen teacher with the summed loss
// (matting + distill + compress). Writes one CSV row per step as
// step,matting,distill,compress,total,gamma_hard when csv is non-null.
template <typename T>
std::vector<StepLog> train_student(ModelWeights<T>& student, const ModelWeights<T>& teacher,
                                   const RunConfig& cfg,
                                   const std::vector<LoadedSample<T>>& data,
                                   std::size_t steps, Rng rng, std::ostream* csv,
                                   const StepCallback<T>& after_step = nullptr);

// Deterministic held-out evaluation with argmax routing (no noise).
template <typename T>
struct EvalResult {
    double matting = 0, distill = 0, gamma_hard = 0;
};

template <typename T>
EvalResult<T> evaluate(const ModelWeights<T>& student, const ModelWeights<T>& teacher,
                       const RunConfig& cfg, const std::vector<LoadedSample<T>>& samples);

}  // namespace memroute
