#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "memroute/batr.hpp"
#include "memroute/grad_check.hpp"
#include "memroute/ops.hpp"
#include "memroute/verify.hpp"
#include "test_util.hpp"

using namespace memroute;
using testutil::random_tensor;

TEST_CASE("vanishing temperature with frozen noise reduces to argmax") {
    Rng rng(1);
    auto logits = random_tensor<double>({1, 16, 2}, rng);
    auto lp = ops::log_softmax(logits, -1);
    auto g = sample_gumbel<double>({1, 16, 2}, rng);
    auto dec = decide_train(lp, 1e-9, g);
    for (std::size_t i = 0; i < 16; ++i) {
        const double a0 = lp.at(2 * i) + g.at(2 * i);
        const double a1 = lp.at(2 * i + 1) + g.at(2 * i + 1);
        CHECK(dec.delta[i] == (a1 > a0 ? 1 : 0));
    }
}

TEST_CASE("heavily skewed probabilities select the favored class") {
    // p1 = 0.999: the Gumbel-max property makes the hard decision Bernoulli(p1)
    const double freq = verify::gumbel_class1_frequency(0.999, 10000, 1.0, 21);
    CHECK(freq >= 0.99);
}

TEST_CASE("gumbel frequency tracks the router probability (AC-7 oracle)") {
    const double freq = verify::gumbel_class1_frequency(0.9, 10000, 1.0, 1337);
    CHECK(std::abs(freq - 0.9) <= 0.02);
}

TEST_CASE("gradient of mean(soft) w.r.t. log-probs matches finite differences") {
    Rng rng(2);
    auto noise = sample_gumbel<double>({1, 5, 2}, rng);
    auto f = [&](const TensorD& lp) {
        auto dec = decide_train(lp, 1.0, noise);
        return ops::mean_all(dec.soft);
    };
    CHECK(grad_check(f, random_tensor<double>({1, 5, 2}, rng)) < 1e-6);
}

TEST_CASE("straight-through decision is hard forward, argmax-consistent") {
    Rng rng(3);
    auto lp = ops::log_softmax(random_tensor<double>({2, 9, 2}, rng), -1);
    Rng nrng(17);
    auto dec = decide_train(lp, 0.5, nrng);
    for (std::size_t i = 0; i < dec.delta.size(); ++i) {
        const double s0 = dec.soft.at(2 * i), s1 = dec.soft.at(2 * i + 1);
        CHECK(dec.delta[i] == (s1 > s0 ? 1 : 0));
        CHECK(dec.st.at(2 * i + 1) == (dec.delta[i] ? 1.0 : 0.0));
        CHECK(dec.st.at(2 * i) == (dec.delta[i] ? 0.0 : 1.0));
    }
}

TEST_CASE("decide_train rejects a non-positive temperature") {
    Rng rng(4);
    auto lp = ops::log_softmax(random_tensor<double>({1, 2, 2}, rng), -1);
    CHECK_THROWS_AS(decide_train(lp, 0.0, rng), ConfigError);
    CHECK_THROWS_AS(decide_train(lp, -1.0, rng), ConfigError);
}

TEST_CASE("decide_infer spec cases") {
    auto skew = TensorD::from({1, 1, 2}, {std::log(0.9), std::log(0.1)});
    CHECK(decide_infer(skew)[0] == 0);

    auto tie = TensorD::from({1, 1, 2}, {-std::log(2.0), -std::log(2.0)});
    CHECK(decide_infer(tie)[0] == 0);  // exact tie goes to the cheap branch

    Rng rng(5);
    auto lp = random_tensor<double>({3, 8, 2}, rng);
    auto delta = decide_infer(lp);
    for (std::size_t i = 0; i < delta.size(); ++i)
        CHECK(delta[i] == (lp.at(2 * i + 1) > lp.at(2 * i) ? 1 : 0));

    // adding a constant to both columns never changes the decision
    auto shifted = decide_infer(ops::affine(lp, 1.0, -2.75));
    CHECK(shifted == delta);
}

TEST_CASE("compute_gamma is the exact mean of the decisions") {
    CHECK(compute_gamma(TensorD::full({2, 3, 4}, 1.0)) == 1.0);
    TensorD half = TensorD::zeros({2, 4});
    for (std::size_t i = 0; i < 4; ++i) half.mut_data()[i] = 1.0;
    CHECK(compute_gamma(half) == 0.5);

    Rng rng(6);
    TensorD d = TensorD::zeros({2, 3, 5});
    std::size_t ones = 0;
    for (auto& v : d.mut_data()) {
        v = rng.randint(2) ? 1.0 : 0.0;
        ones += v == 1.0;
    }
    CHECK(compute_gamma(d) == static_cast<double>(ones) / 30.0);

    CHECK_THROWS_AS(compute_gamma(TensorD::full({2}, 0.5)), NumericError);
}

TEST_CASE("top-k cap spec cases") {
    SUBCASE("k at least the count leaves decisions untouched") {
        Rng rng(7);
        auto lp = ops::log_softmax(random_tensor<double>({1, 8, 2}, rng), -1);
        auto delta = decide_infer(lp);
        CHECK(apply_topk_cap(lp, delta, 8) == delta);
    }
    SUBCASE("k = 0 empties the attention branch") {
        Rng rng(8);
        auto lp = ops::log_softmax(random_tensor<double>({1, 8, 2}, rng), -1);
        auto capped = apply_topk_cap(lp, decide_infer(lp), 0);
        for (auto d : capped) CHECK(d == 0);
    }
    SUBCASE("keeps the k highest attention scores") {
        const std::vector<double> p1 = {.9, .1, .8, .7, .2, .6};
        TensorD lp = TensorD::zeros({1, 6, 2});
        for (std::size_t i = 0; i < 6; ++i) {
            lp.mut_data()[2 * i] = std::log(1 - p1[i]);
            lp.mut_data()[2 * i + 1] = std::log(p1[i]);
        }
        std::vector<std::uint8_t> all_on(6, 1);
        auto capped = apply_topk_cap(lp, all_on, 3);
        CHECK(capped == std::vector<std::uint8_t>{1, 0, 1, 1, 0, 0});
    }
    SUBCASE("ties keep the lower token index") {
        TensorD lp = TensorD::zeros({1, 4, 2});
        for (std::size_t i = 0; i < 4; ++i) {
            lp.mut_data()[2 * i] = std::log(0.5);
            lp.mut_data()[2 * i + 1] = std::log(0.5);
        }
        std::vector<std::uint8_t> all_on(4, 1);
        CHECK(apply_topk_cap(lp, all_on, 2) == std::vector<std::uint8_t>{1, 1, 0, 0});
    }
    SUBCASE("count invariant holds per sample") {
        Rng rng(9);
        for (std::size_t trial = 0; trial < 10; ++trial) {
            auto lp = ops::log_softmax(random_tensor<double>({2, 10, 2}, rng), -1);
            auto delta = decide_infer(lp);
            const std::size_t k = trial % 5;
            auto capped = apply_topk_cap(lp, delta, k);
            for (std::size_t b = 0; b < 2; ++b) {
                std::size_t pre = 0, post = 0;
                for (std::size_t i = 0; i < 10; ++i) {
                    pre += delta[b * 10 + i];
                    post += capped[b * 10 + i];
                }
                CHECK(post == std::min(k, pre));
            }
        }
    }
}

TEST_CASE("routing config validation") {
    RoutingConfig c;
    c.rho = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.rho = 0.25;
    c.tau = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.tau = 1.0;
    CHECK_NOTHROW(c.validate());
}
