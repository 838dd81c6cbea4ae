#pragma once

#include <filesystem>

#include "memroute/tensor.hpp"

namespace memroute {

// MRT1 tensor file: magic "MRT1", u8 dtype (0=f32, 1=f64), u8 ndim,
// ndim x u64 little-endian dims, then raw little-endian values. Round-trips
// are bit-exact.
template <typename T>
void write_mrt(const std::filesystem::path& path, const Tensor<T>& t);

template <typename T>
Tensor<T> read_mrt(const std::filesystem::path& path);

DType peek_mrt_dtype(const std::filesystem::path& path);

}  // namespace memroute
