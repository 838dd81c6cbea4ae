#pragma once

#include <functional>

#include "memroute/tensor.hpp"

namespace memroute {

// Central-difference gradient verification for a deterministic scalar-valued
// function of one f64 tensor (stochastic nodes must be fed frozen noise).
// Returns max over coordinates of |analytic - fd| / max(1, |fd|).
double grad_check(const std::function<TensorD(const TensorD&)>& f, const TensorD& x,
                  double h = 1e-5);

}  // namespace memroute
