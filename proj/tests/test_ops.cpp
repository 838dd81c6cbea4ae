#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "memroute/grad_check.hpp"
#include "memroute/ops.hpp"
#include "memroute/reference.hpp"
#include "memroute/tape.hpp"
#include "test_util.hpp"

using namespace memroute;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST_CASE("matmul identity and hand cases") {
    auto eye = TensorD::from({2, 2}, {1, 0, 0, 1});
    auto m = TensorD::from({2, 2}, {2, 3, 4, 5});
    CHECK(max_abs_diff(ops::matmul(eye, m), m) == 0.0);

    auto a = TensorD::from({1, 2}, {1, 2});
    auto b = TensorD::from({2, 1}, {3, 4});
    CHECK(ops::matmul(a, b).item() == doctest::Approx(11.0));
}

TEST_CASE("matmul matches the triple-loop oracle") {
    Rng rng(3);
    auto a = random_tensor<double>({3, 4}, rng);
    auto b = random_tensor<double>({4, 2}, rng);
    auto c = ops::matmul(a, b);
    std::vector<double> expect(6);
    ref::matmul(a.data().data(), b.data().data(), expect.data(), 3, 4, 2);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(std::abs(c.at(i) - expect[i]) < 1e-12);
}

TEST_CASE("matmul rejects mismatched shapes with both named") {
    auto a = TensorD::zeros({2, 3});
    auto b = TensorD::zeros({4, 2});
    try {
        ops::matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,2]") != std::string::npos);
    }
}

TEST_CASE("softmax spec cases") {
    auto even = ops::softmax(TensorD::from({3}, {0, 0, 0}), -1);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(even.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-9));

    // large logits stay finite in f32 thanks to max subtraction
    auto stable = ops::softmax(TensorF::from({2}, {1000.0f, 0.0f}), -1);
    CHECK(stable.at(0) == doctest::Approx(1.0f));
    CHECK(stable.at(1) == doctest::Approx(0.0f));

    auto x = TensorD::from({1, 3}, {1, 2, 3});
    auto y = ops::softmax(x, -1);
    std::vector<double> expect(3);
    ref::softmax_rows(x.data().data(), expect.data(), 1, 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(y.at(i) - expect[i]) < 1e-7);
}

TEST_CASE("softmax rows sum to one") {
    Rng rng(11);
    auto xf = random_tensor<float>({6, 9}, rng, -5, 5);
    auto yf = ops::softmax(xf, -1);
    for (std::size_t r = 0; r < 6; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 9; ++c) s += yf.at(r * 9 + c);
        CHECK(std::abs(s - 1.0) < 1e-6);
    }
    auto xd = random_tensor<double>({6, 9}, rng, -5, 5);
    auto yd = ops::softmax(xd, -1);
    for (std::size_t r = 0; r < 6; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 9; ++c) s += yd.at(r * 9 + c);
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("log_softmax spec cases") {
    auto y = ops::log_softmax(TensorD::from({2}, {0, 0}), -1);
    CHECK(y.at(0) == doctest::Approx(-std::log(2.0)));
    CHECK(y.at(1) == doctest::Approx(-std::log(2.0)));

    Rng rng(5);
    auto x = random_tensor<double>({4, 5}, rng, -3, 3);
    auto ls = ops::log_softmax(x, -1);
    auto sm = ops::softmax(x, -1);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(std::abs(ls.at(i) - std::log(sm.at(i))) < 1e-6);

    auto two = TensorD::from({1, 2}, {5, 1});
    auto got = ops::log_softmax(two, -1);
    std::vector<double> expect(2);
    ref::log_softmax_rows(two.data().data(), expect.data(), 1, 2);
    CHECK(std::abs(got.at(0) - expect[0]) < 1e-7);
    CHECK(std::abs(got.at(1) - expect[1]) < 1e-7);
}

TEST_CASE("layer_norm spec cases") {
    auto gain = TensorD::from({4}, {1, 1, 1, 1});
    auto bias = TensorD::zeros({4});
    auto constant = ops::layer_norm(TensorD::from({1, 4}, {3, 3, 3, 3}), gain, bias);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(constant.at(i)) < 1e-6);

    auto g2 = TensorD::from({2}, {1, 1});
    auto b2 = TensorD::zeros({2});
    auto pm = ops::layer_norm(TensorD::from({1, 2}, {1, -1}), g2, b2, 1e-12);
    CHECK(pm.at(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(pm.at(1) == doctest::Approx(-1.0).epsilon(1e-6));

    Rng rng(17);
    auto x = random_tensor<double>({1, 8}, rng, -2, 2);
    auto g8 = TensorD::full({8}, 1.0);
    auto b8 = TensorD::zeros({8});
    auto y = ops::layer_norm(x, g8, b8);
    double mean = 0;
    for (std::size_t i = 0; i < 8; ++i) mean += y.at(i);
    mean /= 8;
    double var = 0;
    for (std::size_t i = 0; i < 8; ++i) var += (y.at(i) - mean) * (y.at(i) - mean);
    var /= 8;
    CHECK(std::abs(mean) < 1e-7);
    CHECK(std::abs(var - 1.0) < 1e-5);
}

TEST_CASE("depthwise conv spec cases") {
    SUBCASE("center one-hot kernel is the identity") {
        Rng rng(4);
        auto x = random_tensor<double>({1, 2, 5, 5}, rng);
        TensorD k = TensorD::zeros({2, 3, 3});
        k.mut_data()[4] = 1.0;
        k.mut_data()[9 + 4] = 1.0;
        CHECK(max_abs_diff(ops::depthwise_conv2d(x, k), x) == 0.0);
    }
    SUBCASE("all-ones kernel on a constant image gives 9x in the interior") {
        auto x = TensorD::full({1, 1, 5, 5}, 2.0);
        auto k = TensorD::full({1, 3, 3}, 1.0);
        auto y = ops::depthwise_conv2d(x, k);
        for (std::size_t i = 1; i < 4; ++i)
            for (std::size_t j = 1; j < 4; ++j)
                CHECK(y.at(i * 5 + j) == doctest::Approx(18.0));
    }
    SUBCASE("matches the naive loop") {
        Rng rng(9);
        auto x = random_tensor<double>({1, 2, 5, 5}, rng);
        auto k = random_tensor<double>({2, 3, 3}, rng);
        auto y = ops::depthwise_conv2d(x, k);
        std::vector<double> expect(x.size());
        ref::dwconv2d(x.data().data(), k.data().data(), expect.data(), 1, 2, 5, 5, 3, 3);
        for (std::size_t i = 0; i < expect.size(); ++i)
            CHECK(std::abs(y.at(i) - expect[i]) < 1e-6);
    }
    SUBCASE("channel separation") {
        Rng rng(13);
        auto x = random_tensor<double>({1, 2, 4, 4}, rng);
        auto k = random_tensor<double>({2, 3, 3}, rng);
        auto y0 = ops::depthwise_conv2d(x, k);
        TensorD x2 = x.clone();
        x2.mut_data()[5] += 0.5;  // perturb channel 0 only
        auto y1 = ops::depthwise_conv2d(x2, k);
        for (std::size_t i = 16; i < 32; ++i) CHECK(y0.at(i) == y1.at(i));
    }
    SUBCASE("even kernel is a config error") {
        CHECK_THROWS_AS(ops::depthwise_conv2d(TensorD::zeros({1, 1, 4, 4}),
                                              TensorD::zeros({1, 2, 2})),
                        ConfigError);
    }
}

TEST_CASE("conv1d spec cases") {
    SUBCASE("one-hot center kernel is the identity") {
        Rng rng(21);
        auto x = random_tensor<double>({1, 1, 6}, rng);
        auto k = TensorD::from({3}, {0, 1, 0});
        CHECK(max_abs_diff(ops::conv1d(x, k), x) == 0.0);
    }
    SUBCASE("ones kernel on ones input") {
        auto x = TensorD::from({1, 1, 4}, {1, 1, 1, 1});
        auto k = TensorD::from({3}, {1, 1, 1});
        auto y = ops::conv1d(x, k);
        CHECK(y.at(0) == doctest::Approx(2.0));
        CHECK(y.at(1) == doctest::Approx(3.0));
        CHECK(y.at(2) == doctest::Approx(3.0));
        CHECK(y.at(3) == doctest::Approx(2.0));
    }
    SUBCASE("matches the naive loop") {
        Rng rng(22);
        auto x = random_tensor<double>({1, 1, 16}, rng);
        auto k = random_tensor<double>({5}, rng);
        auto y = ops::conv1d(x, k);
        std::vector<double> expect(16);
        ref::conv1d_same(x.data().data(), k.data().data(), expect.data(), 1, 16, 5);
        for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(y.at(i) - expect[i]) < 1e-6);
    }
    SUBCASE("even kernel is a config error") {
        CHECK_THROWS_AS(ops::conv1d(TensorD::zeros({1, 1, 4}), TensorD::zeros({4})),
                        ConfigError);
    }
}

TEST_CASE("grad_check spec examples") {
    auto quad = [](const TensorD& x) { return ops::sum_all(ops::square(x)); };
    CHECK(grad_check(quad, TensorD::from({3}, {1, 2, 3})) < 1e-8);

    auto soft_sq = [](const TensorD& x) {
        return ops::sum_all(ops::square(ops::softmax(x, -1)));
    };
    Rng rng(31);
    CHECK(grad_check(soft_sq, random_tensor<double>({1, 5}, rng)) < 1e-6);
}

TEST_CASE("every differentiable op matches finite differences on small inputs") {
    Rng rng(101);
    const double tol = 1e-6;
    auto sumsq = [](const TensorD& t) { return ops::sum_all(ops::square(t)); };

    auto c10 = random_tensor<double>({10}, rng);
    CHECK(grad_check([&](const TensorD& x) { return sumsq(ops::add(x, c10)); },
                     random_tensor<double>({10}, rng)) < tol);
    CHECK(grad_check([&](const TensorD& x) { return sumsq(ops::sub(x, c10)); },
                     random_tensor<double>({10}, rng)) < tol);
    CHECK(grad_check([&](const TensorD& x) { return sumsq(ops::mul(x, c10)); },
                     random_tensor<double>({10}, rng)) < tol);
    CHECK(grad_check([&](const TensorD& x) { return sumsq(ops::sigmoid(x)); },
                     random_tensor<double>({10}, rng, -2, 2)) < tol);
    CHECK(grad_check([&](const TensorD& x) { return sumsq(ops::gelu(x)); },
                     random_tensor<double>({10}, rng, -2, 2)) < tol);
    CHECK(grad_check([](const TensorD& x) { return ops::sum_all(ops::abs(x)); },
                     random_tensor<double>({10}, rng, 0.3, 1.0)) < tol);
    CHECK(grad_check([&](const TensorD& x) { return sumsq(ops::mean_axis(x, 0, false)); },
                     random_tensor<double>({5, 2}, rng)) < tol);
    CHECK(grad_check([](const TensorD& x) { return ops::mean_all(ops::square(x)); },
                     random_tensor<double>({10}, rng)) < tol);
    auto w = random_tensor<double>({5, 2}, rng);
    CHECK(grad_check([&](const TensorD& x) { return sumsq(ops::matmul(x, w)); },
                     random_tensor<double>({2, 5}, rng)) < tol);
    CHECK(grad_check([&](const TensorD& x) { return sumsq(ops::matmul_nt(x, w)); },
                     random_tensor<double>({3, 2}, rng)) < tol);
    CHECK(grad_check([&](const TensorD& x) { return sumsq(ops::softmax(x, -1)); },
                     random_tensor<double>({2, 5}, rng)) < tol);
    CHECK(grad_check([&](const TensorD& x) { return sumsq(ops::log_softmax(x, -1)); },
                     random_tensor<double>({2, 5}, rng)) < tol);
    CHECK(grad_check(
              [&](const TensorD& x) {
                  return sumsq(ops::broadcast_to(ops::reshape(x, {1, 5}), {3, 5}));
              },
              random_tensor<double>({5}, rng)) < tol);
    CHECK(grad_check(
              [&](const TensorD& x) {
                  auto parts = ops::split(x, 0, {2, 3});
                  return sumsq(ops::concat<double>({parts[1], parts[0]}, 0));
              },
              random_tensor<double>({5, 2}, rng)) < tol);
    CHECK(grad_check(
              [&](const TensorD& x) {
                  return sumsq(ops::gather_rows(x, {1, 1, 3}));
              },
              random_tensor<double>({5, 2}, rng)) < tol);
}

TEST_CASE("transpose and permute round trips") {
    Rng rng(55);
    auto x = random_tensor<double>({3, 4}, rng);
    CHECK(max_abs_diff(ops::transpose(ops::transpose(x)), x) == 0.0);
    auto y = random_tensor<double>({2, 3, 4}, rng);
    auto p = ops::permute(y, {2, 0, 1});
    CHECK(p.shape() == Shape{4, 2, 3});
    CHECK(max_abs_diff(ops::permute(p, {1, 2, 0}), y) == 0.0);
}

TEST_CASE("broadcast add of a row vector") {
    auto x = TensorD::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = TensorD::from({3}, {10, 20, 30});
    auto y = ops::add(x, b);
    CHECK(y.at(0) == doctest::Approx(11));
    CHECK(y.at(5) == doctest::Approx(36));
}
