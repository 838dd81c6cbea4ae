#pragma once

#include <filesystem>

#include "memroute/tensor.hpp"

namespace memroute {

// Binary netpbm I/O, maxval 255. PPM (P6) carries [3,H,W] tensors, PGM (P5)
// carries [H,W]; values are scaled to/from [0,1].

template <typename T>
void write_ppm(const std::filesystem::path& path, const Tensor<T>& image);
template <typename T>
Tensor<T> read_ppm(const std::filesystem::path& path);

template <typename T>
void write_pgm(const std::filesystem::path& path, const Tensor<T>& gray);
template <typename T>
Tensor<T> read_pgm(const std::filesystem::path& path);

// Raw byte-valued PGM (e.g. routing masks with 0/255 levels).
void write_pgm_bytes(const std::filesystem::path& path, const std::uint8_t* data,
                     std::size_t width, std::size_t height);

}  // namespace memroute
