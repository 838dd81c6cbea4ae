#pragma once

#include <filesystem>
#include <string>

#include "memroute/rng.hpp"
#include "memroute/tensor.hpp"

namespace testutil {

template <typename T>
memroute::Tensor<T> random_tensor(memroute::Shape shape, memroute::Rng& rng,
                                  double lo = -1.0, double hi = 1.0) {
    auto t = memroute::Tensor<T>::zeros(std::move(shape));
    for (T& v : t.mut_data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

template <typename T>
double max_abs_diff(const memroute::Tensor<T>& a, const memroute::Tensor<T>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.at(i)) - static_cast<double>(b.at(i))));
    return m;
}

// Fresh scratch directory under the working directory.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::path("test_tmp") / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testutil
