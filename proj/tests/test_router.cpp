#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "memroute/ops.hpp"
#include "memroute/reference.hpp"
#include "memroute/router.hpp"
#include "test_util.hpp"

using namespace memroute;
using testutil::random_tensor;

namespace {

RouterParams<double> random_router(std::size_t d, Rng& rng) {
    RouterParams<double> p;
    p.ln_gain = random_tensor<double>({d}, rng, 0.5, 1.5);
    p.ln_bias = random_tensor<double>({d}, rng, -0.2, 0.2);
    p.w1 = random_tensor<double>({d, d}, rng);
    p.b1 = random_tensor<double>({d}, rng);
    p.w2 = random_tensor<double>({d, 2}, rng);
    p.b2 = random_tensor<double>({2}, rng);
    return p;
}

RouterParams<double> zero_router(std::size_t d) {
    RouterParams<double> p;
    p.ln_gain = TensorD::full({d}, 1.0);
    p.ln_bias = TensorD::zeros({d});
    p.w1 = TensorD::zeros({d, d});
    p.b1 = TensorD::zeros({d});
    p.w2 = TensorD::zeros({d, 2});
    p.b2 = TensorD::zeros({2});
    return p;
}

}  // namespace

TEST_CASE("all-zero weights give symmetric log-probabilities") {
    Rng rng(1);
    auto x = random_tensor<double>({2, 5, 4}, rng);
    auto lp = route_probs(x, zero_router(4));
    REQUIRE(lp.shape() == Shape{2, 5, 2});
    for (std::size_t i = 0; i < lp.size(); ++i)
        CHECK(lp.at(i) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("a single token is its own global context") {
    // With N=1 the shared global half equals that token's own second half, so
    // the result must match a router run where concat(local, own-second-half)
    // is computed by hand.
    Rng rng(2);
    auto p = random_router(6, rng);
    auto x = random_tensor<double>({1, 1, 6}, rng);
    auto lp = route_probs(x, p);
    auto normed = ops::layer_norm(x, p.ln_gain, p.ln_bias);
    auto z = ops::add(ops::matmul(ops::reshape(normed, {1, 6}), p.w1), p.b1);
    // with one token, concat(z_local, mean(z_global)) == z itself
    auto logits = ops::add(ops::matmul(z, p.w2), p.b2);
    auto expect = ops::log_softmax(logits, -1);
    CHECK(testutil::max_abs_diff(lp, ops::reshape(expect, {1, 1, 2})) < 1e-12);
}

TEST_CASE("route_probs matches the straight-line oracle") {
    Rng rng(3);
    auto p = random_router(4, rng);
    auto x = random_tensor<double>({1, 4, 4}, rng);
    auto lp = route_probs(x, p);
    std::vector<double> expect(4 * 2);
    ref::router_log_probs(x.data().data(), p.ln_gain.data().data(), p.ln_bias.data().data(),
                          p.w1.data().data(), p.b1.data().data(), p.w2.data().data(),
                          p.b2.data().data(), 4, 4, 1e-6, expect.data());
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(std::abs(lp.at(i) - expect[i]) < 1e-10);
}

TEST_CASE("token permutation permutes log-probabilities identically") {
    Rng rng(4);
    auto p = random_router(8, rng);
    auto x = random_tensor<double>({1, 6, 8}, rng);
    auto lp = route_probs(x, p);
    std::vector<std::size_t> perm = {5, 2, 0, 4, 1, 3};
    auto xp = ops::reshape(ops::gather_rows(ops::reshape(x, {6, 8}), perm), {1, 6, 8});
    auto lpp = route_probs(xp, p);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t c = 0; c < 2; ++c)
            CHECK(std::abs(lpp.at(i * 2 + c) - lp.at(perm[i] * 2 + c)) < 1e-12);
}

TEST_CASE("tokens with equal local halves share log-probabilities") {
    // Construct two tokens whose post-norm, post-affine first-half channels
    // agree; the shared global half then forces identical outputs.
    Rng rng(5);
    const std::size_t d = 4;
    auto p = zero_router(d);
    p.w1 = TensorD::from({d, d}, {// maps x -> (x0+x1+x2+x3) in every channel
                                  1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
    p.w2 = random_tensor<double>({d, 2}, rng);
    auto x = random_tensor<double>({1, 3, d}, rng);
    auto lp = route_probs(x, p);
    // every token's z is constant across channels and layer norm makes rows
    // zero-mean, so all z vanish and every token gets the same logits
    for (std::size_t i = 1; i < 3; ++i)
        for (std::size_t c = 0; c < 2; ++c)
            CHECK(lp.at(i * 2 + c) == doctest::Approx(lp.at(c)).epsilon(1e-10));
}

TEST_CASE("probabilities normalize") {
    Rng rng(6);
    auto p = random_router(8, rng);
    auto x = random_tensor<double>({3, 7, 8}, rng);
    auto lp = route_probs(x, p);
    for (std::size_t i = 0; i < 21; ++i) {
        const double s = std::exp(lp.at(2 * i)) + std::exp(lp.at(2 * i + 1));
        CHECK(std::abs(s - 1.0) < 1e-5);
    }
}

TEST_CASE("odd channel count is a config error") {
    RouterParams<double> p;
    p.ln_gain = TensorD::full({3}, 1.0);
    p.ln_bias = TensorD::zeros({3});
    p.w1 = TensorD::zeros({3, 3});
    p.b1 = TensorD::zeros({3});
    p.w2 = TensorD::zeros({3, 2});
    p.b2 = TensorD::zeros({2});
    CHECK_THROWS_AS(route_probs(TensorD::zeros({1, 2, 3}), p), ConfigError);
}
