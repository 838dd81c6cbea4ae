#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "memroute/attention.hpp"
#include "memroute/ops.hpp"
#include "memroute/reference.hpp"
#include "test_util.hpp"

using namespace memroute;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

AttentionParams<double> random_params(std::size_t d, std::size_t heads, Rng& rng) {
    AttentionParams<double> p;
    p.wq = random_tensor<double>({d, d}, rng);
    p.wk = random_tensor<double>({d, d}, rng);
    p.wv = random_tensor<double>({d, d}, rng);
    p.wo = random_tensor<double>({d, d}, rng);
    p.heads = heads;
    return p;
}

}  // namespace

TEST_CASE("single token attends only to itself") {
    Rng rng(1);
    auto p = random_params(6, 2, rng);
    auto x = random_tensor<double>({1, 1, 6}, rng);
    auto y = attend(x, p);
    // softmax over one key is 1, so output = x . Wv . Wo
    auto expect = ops::matmul(ops::matmul(ops::reshape(x, {1, 6}), p.wv), p.wo);
    CHECK(max_abs_diff(y, ops::reshape(expect, {1, 1, 6})) < 1e-12);
}

TEST_CASE("identical tokens produce identical outputs") {
    Rng rng(2);
    auto p = random_params(8, 2, rng);
    TensorD x = TensorD::zeros({1, 5, 8});
    auto row = random_tensor<double>({8}, rng);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t c = 0; c < 8; ++c) x.mut_data()[i * 8 + c] = row.at(c);
    auto y = attend(x, p);
    for (std::size_t i = 1; i < 5; ++i)
        for (std::size_t c = 0; c < 8; ++c)
            CHECK(y.at(i * 8 + c) == doctest::Approx(y.at(c)).epsilon(1e-10));
}

TEST_CASE("attend matches the naive per-head oracle") {
    Rng rng(3);
    auto p = random_params(8, 2, rng);
    auto x = random_tensor<double>({1, 5, 8}, rng);
    auto y = attend(x, p);
    std::vector<double> expect(5 * 8);
    ref::attention(x.data().data(), p.wq.data().data(), p.wk.data().data(),
                   p.wv.data().data(), p.wo.data().data(), 5, 8, 2, expect.data());
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(std::abs(y.at(i) - expect[i]) < 1e-10);
}

TEST_CASE("attention is permutation equivariant") {
    Rng rng(4);
    auto p = random_params(8, 4, rng);
    auto x = random_tensor<double>({1, 6, 8}, rng);
    auto y = attend(x, p);
    std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
    auto xp = ops::reshape(ops::gather_rows(ops::reshape(x, {6, 8}), perm), {1, 6, 8});
    auto yp = attend(xp, p);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t c = 0; c < 8; ++c)
            CHECK(std::abs(yp.at(i * 8 + c) - y.at(perm[i] * 8 + c)) < 1e-5);
}

TEST_CASE("attend_subset with every index equals attend") {
    Rng rng(5);
    auto p = random_params(8, 2, rng);
    auto x = random_tensor<double>({2, 7, 8}, rng);
    auto full = attend(x, p);
    std::vector<std::size_t> all(7);
    for (std::size_t i = 0; i < 7; ++i) all[i] = i;
    auto rows = attend_subset(x, {all, all}, p);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t i = 0; i < 7 * 8; ++i)
            CHECK(std::abs(rows[b].at(i) - full.at(b * 7 * 8 + i)) <= 1e-12);
}

TEST_CASE("singleton subset reduces to the value/output projection") {
    Rng rng(6);
    auto p = random_params(6, 3, rng);
    auto x = random_tensor<double>({1, 5, 6}, rng);
    auto rows = attend_subset(x, {{2}}, p);
    auto xi = ops::gather_rows(ops::reshape(x, {5, 6}), {2});
    auto expect = ops::matmul(ops::matmul(xi, p.wv), p.wo);
    CHECK(max_abs_diff(rows[0], expect) < 1e-12);
}

TEST_CASE("subset of even rows equals attention on the gathered sequence") {
    Rng rng(7);
    auto p = random_params(8, 2, rng);
    auto x = random_tensor<double>({1, 8, 8}, rng);
    std::vector<std::size_t> even = {0, 2, 4, 6};
    auto rows = attend_subset(x, {even}, p);
    auto gathered = ops::reshape(ops::gather_rows(ops::reshape(x, {8, 8}), even), {1, 4, 8});
    auto expect = attend(gathered, p);
    CHECK(max_abs_diff(rows[0], ops::reshape(expect, {4, 8})) == 0.0);
    std::vector<double> oracle(4 * 8);
    ref::attention(gathered.data().data(), p.wq.data().data(), p.wk.data().data(),
                   p.wv.data().data(), p.wo.data().data(), 4, 8, 2, oracle.data());
    for (std::size_t i = 0; i < oracle.size(); ++i)
        CHECK(std::abs(rows[0].at(i) - oracle[i]) < 1e-10);
}

TEST_CASE("subset index validation") {
    Rng rng(8);
    auto p = random_params(4, 2, rng);
    auto x = random_tensor<double>({1, 4, 4}, rng);
    CHECK_THROWS_AS(attend_subset(x, {{1, 1}}, p), ShapeError);   // duplicate
    CHECK_THROWS_AS(attend_subset(x, {{2, 1}}, p), ShapeError);   // not increasing
    CHECK_THROWS_AS(attend_subset(x, {{0, 9}}, p), ShapeError);   // out of range
    CHECK_THROWS_AS([&] {
        auto bad = random_params(6, 4, rng);  // 6 % 4 != 0
        attend(random_tensor<double>({1, 2, 6}, rng), bad);
    }(), ConfigError);
}

TEST_CASE("attention cost model") {
    CHECK(attention_cost(0, 6, 384).attn_map_bytes == 0);
    CHECK(attention_cost(4096, 6, 384, 4).attn_map_bytes == 402653184ull);
    // halving the token count quarters the map exactly
    const auto full = attention_cost(4096, 6, 384, 4);
    const auto half = attention_cost(2048, 6, 384, 4);
    CHECK(full.attn_map_bytes == 4 * half.attn_map_bytes);
    // quadratic law for the map term
    for (std::uint64_t n : {16ull, 128ull, 1000ull}) {
        CHECK(attention_cost(2 * n, 8, 256).attn_map_bytes ==
              4 * attention_cost(n, 8, 256).attn_map_bytes);
    }
}

TEST_CASE("cost report CSV totals equal per-block sums") {
    CostReport r;
    r.per_block = {{0, 10, 400, 5000}, {1, 20, 1600, 9000}};
    CHECK(r.total_bytes() == 2000);
    CHECK(r.total_flops() == 14000);
    std::ostringstream os;
    r.write_csv(os);
    CHECK(os.str() ==
          "block,routed_tokens,attn_map_bytes,flops\n0,10,400,5000\n1,20,1600,9000\n"
          "total,30,2000,14000\n");
}
