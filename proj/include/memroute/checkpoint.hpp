#pragma once

#include <filesystem>

#include "memroute/config.hpp"
#include "memroute/encoder.hpp"

namespace memroute {

// Checkpoint = directory of MRT1 tensor files plus manifest.json mapping
// parameter names to files and recording the run configuration. Manifest
// format tag: "memroute-ckpt-1".

inline constexpr const char* kCheckpointFormat = "memroute-ckpt-1";

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const RunConfig& cfg,
                     ModelWeights<T>& weights, const std::string& kind);

RunConfig read_checkpoint_config(const std::filesystem::path& dir);
std::string read_checkpoint_kind(const std::filesystem::path& dir);

// Builds a model of the manifest's architecture and loads every parameter.
template <typename T>
ModelWeights<T> load_checkpoint(const std::filesystem::path& dir, const RunConfig& cfg);

}  // namespace memroute
