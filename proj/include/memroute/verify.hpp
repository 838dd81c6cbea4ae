#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace memroute::verify {

struct CheckResult {
    std::string suite;
    std::string name;
    double measured = 0.0;
    double threshold = 0.0;
    bool pass = false;  // measured <= threshold
};

std::vector<CheckResult> run_grad_suite();
std::vector<CheckResult> run_oracle_suite();
std::vector<CheckResult> run_routing_suite();
// suite in {"grad","oracle","routing","all"}; throws ConfigError otherwise.
std::vector<CheckResult> run_suite(const std::string& suite);

// ---- primitives shared with the acceptance tests ----

// Max |student - teacher| over encoder features in f64 with every routing
// decision forced to the attention branch and weights copied from the teacher
// (64x64 input, patch 16, dim 32, 2 heads, depth 2).
double full_routing_max_diff();

// Max relative error between analytic and central-difference gradients of the
// summed loss (matting + distillation + compression), over every trainable
// parameter group of a tiny f64 student with frozen routing noise.
double full_loss_grad_max_err();

// Empirical frequency of the attention class under hard Gumbel-Softmax
// decisions for a router probability p1, over `draws` independent samples.
double gumbel_class1_frequency(double p1, std::size_t draws, double tau,
                               std::uint64_t seed);

}  // namespace memroute::verify
