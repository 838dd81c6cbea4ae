#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "memroute/matting.hpp"

namespace memroute {

// On-disk layout: one directory per sample holding image/fg/bg as binary PPM,
// the alpha matte as 8-bit PGM plus a float MRT1 copy for loss-grade
// precision, and a top-level index.json listing samples and seeds.

struct DatasetIndexEntry {
    std::string dir;
    std::uint64_t seed = 0;
};

struct DatasetIndex {
    std::size_t count = 0;
    std::size_t size = 0;
    std::string difficulty;
    std::uint64_t seed = 0;
    std::vector<DatasetIndexEntry> samples;
};

void write_dataset(const std::filesystem::path& out_dir, std::size_t count,
                   std::size_t size, Difficulty difficulty, std::uint64_t seed);

DatasetIndex read_dataset_index(const std::filesystem::path& dir);

// A loaded sample for training: image from the quantized PPM, alpha from the
// float MRT1 file.
template <typename T>
struct LoadedSample {
    Tensor<T> image;  // [3,S,S]
    Tensor<T> alpha;  // [S,S]
};

template <typename T>
std::vector<LoadedSample<T>> load_dataset(const std::filesystem::path& dir);

}  // namespace memroute
