#pragma once

#include <filesystem>
#include <string>

#include "memroute/encoder.hpp"

namespace memroute {

enum class OptimizerKind { adam, sgd };

struct OptimConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;  // adam
    double momentum = 0.9;                          // sgd
};

struct LossWeights {
    double matting = 1.0, distill = 1.0, compress = 1.0;
};

// Full run configuration parsed from JSON (kebab-case keys, unknown keys are
// hard errors).
struct RunConfig {
    EncoderConfig encoder;
    OptimConfig optim;
    LossWeights loss_weights;
    std::size_t batch_size = 4;
    bool distill_per_channel_mean = true;
    DType dtype = DType::f32;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace memroute
