// Compares the production kernels against the naive serial reference and
// against themselves with threading disabled. Verifies that the threaded and
// serial paths agree bitwise, then reports timings as CSV.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "memroute/kernels.hpp"
#include "memroute/reference.hpp"
#include "memroute/rng.hpp"

using namespace memroute;
namespace K = memroute::kernels;

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_ms(F&& fn, int iters) {
    fn();  // warmup
    const auto t0 = Clock::now();
    for (int i = 0; i < iters; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Row {
    std::string kernel;
    std::string size;
    double ref_ms, serial_ms, parallel_ms;
    bool bitwise;
};

void print_row(const Row& r) {
    std::printf("%s,%s,%.3f,%.3f,%.3f,%.2f,%s\n", r.kernel.c_str(), r.size.c_str(), r.ref_ms,
                r.serial_ms, r.parallel_ms,
                r.parallel_ms > 0 ? r.serial_ms / r.parallel_ms : 0.0,
                r.bitwise ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
    int iters = 5;
    std::size_t scale = 1;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--iters") == 0 && i + 1 < argc) iters = std::atoi(argv[++i]);
        if (std::strcmp(argv[i], "--scale") == 0 && i + 1 < argc)
            scale = static_cast<std::size_t>(std::atoll(argv[++i]));
    }
    Rng rng(99);
    std::printf("threads=%d\n", K::max_threads());
    std::printf("kernel,size,ref_ms,serial_ms,parallel_ms,speedup,bitwise\n");

    {  // matmul n x n x n
        const std::size_t n = 192 * scale;
        auto a = random_vec(n * n, rng), b = random_vec(n * n, rng);
        std::vector<double> c_ref(n * n), c_ser(n * n), c_par(n * n);
        Row r{"matmul", std::to_string(n) + "^3", 0, 0, 0, false};
        r.ref_ms = time_ms([&] { ref::matmul(a.data(), b.data(), c_ref.data(), n, n, n); },
                           iters);
        K::set_parallel(false);
        r.serial_ms = time_ms(
            [&] { K::matmul(a.data(), b.data(), c_ser.data(), 1, n, n, n, false); }, iters);
        K::set_parallel(true);
        r.parallel_ms = time_ms(
            [&] { K::matmul(a.data(), b.data(), c_par.data(), 1, n, n, n, false); }, iters);
        r.bitwise = bitwise_equal(c_ser, c_par);
        print_row(r);
    }
    {  // softmax over many rows
        const std::size_t rows = 4096 * scale, cols = 256;
        auto x = random_vec(rows * cols, rng);
        std::vector<double> y_ref(x.size()), y_ser(x.size()), y_par(x.size());
        Row r{"softmax_rows", std::to_string(rows) + "x" + std::to_string(cols), 0, 0, 0,
              false};
        r.ref_ms =
            time_ms([&] { ref::softmax_rows(x.data(), y_ref.data(), rows, cols); }, iters);
        K::set_parallel(false);
        r.serial_ms =
            time_ms([&] { K::softmax_rows(x.data(), y_ser.data(), rows, cols); }, iters);
        K::set_parallel(true);
        r.parallel_ms =
            time_ms([&] { K::softmax_rows(x.data(), y_par.data(), rows, cols); }, iters);
        r.bitwise = bitwise_equal(y_ser, y_par);
        print_row(r);
    }
    {  // layer norm over many rows
        const std::size_t rows = 4096 * scale, cols = 256;
        auto x = random_vec(rows * cols, rng);
        auto gain = random_vec(cols, rng), bias = random_vec(cols, rng);
        std::vector<double> y_ref(x.size()), y_ser(x.size()), y_par(x.size());
        std::vector<double> xhat(x.size()), inv_std(rows);
        Row r{"layer_norm_rows", std::to_string(rows) + "x" + std::to_string(cols), 0, 0, 0,
              false};
        r.ref_ms = time_ms(
            [&] {
                ref::layer_norm_rows(x.data(), gain.data(), bias.data(), 1e-6, y_ref.data(),
                                     rows, cols);
            },
            iters);
        K::set_parallel(false);
        r.serial_ms = time_ms(
            [&] {
                K::layer_norm_rows(x.data(), gain.data(), bias.data(), 1e-6, y_ser.data(),
                                   xhat.data(), inv_std.data(), rows, cols);
            },
            iters);
        K::set_parallel(true);
        r.parallel_ms = time_ms(
            [&] {
                K::layer_norm_rows(x.data(), gain.data(), bias.data(), 1e-6, y_par.data(),
                                   xhat.data(), inv_std.data(), rows, cols);
            },
            iters);
        r.bitwise = bitwise_equal(y_ser, y_par);
        print_row(r);
    }
    {  // depthwise conv
        const std::size_t C = 64, H = 128 * scale, W = 128;
        auto x = random_vec(C * H * W, rng);
        auto k = random_vec(C * 9, rng);
        std::vector<double> y_ref(x.size()), y_ser(x.size()), y_par(x.size());
        Row r{"dwconv2d_3x3",
              std::to_string(C) + "x" + std::to_string(H) + "x" + std::to_string(W), 0, 0, 0,
              false};
        r.ref_ms = time_ms(
            [&] { ref::dwconv2d(x.data(), k.data(), y_ref.data(), 1, C, H, W, 3, 3); },
            iters);
        K::set_parallel(false);
        r.serial_ms = time_ms(
            [&] { K::dwconv2d(x.data(), k.data(), y_ser.data(), 1, C, H, W, 3, 3); }, iters);
        K::set_parallel(true);
        r.parallel_ms = time_ms(
            [&] { K::dwconv2d(x.data(), k.data(), y_par.data(), 1, C, H, W, 3, 3); }, iters);
        r.bitwise = bitwise_equal(y_ser, y_par);
        print_row(r);
    }
    return 0;
}
