#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "memroute/ops.hpp"
#include "memroute/tape.hpp"
#include "memroute/tensor_io.hpp"
#include "test_util.hpp"

using namespace memroute;
using testutil::random_tensor;
using testutil::temp_dir;

TEST_CASE("tensor shape and data length must agree") {
    CHECK_NOTHROW(TensorF::from({2, 3}, {1, 2, 3, 4, 5, 6}));
    CHECK_THROWS_AS(TensorF::from({2, 3}, {1, 2, 3}), ShapeError);
    CHECK(TensorF::zeros({4, 5}).size() == 20);
    CHECK(TensorF::scalar(2.5f).item() == 2.5f);
}

TEST_CASE("grad buffer matches tensor shape") {
    TensorD x = TensorD::zeros({3, 2});
    x.set_requires_grad(true);
    CHECK(!x.has_grad());
    x.grad_buffer();
    CHECK(x.grad().size() == x.size());
    CHECK(x.grad_tensor().shape() == x.shape());
}

TEST_CASE("backward of sum gives all ones") {
    TensorD x = TensorD::from({4}, {1, 2, 3, 4});
    x.set_requires_grad(true);
    Tape<double> tape;
    auto loss = ops::sum_all(x);
    tape.backward(loss);
    for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == doctest::Approx(1.0));
}

TEST_CASE("backward of sum of squares gives 2x") {
    TensorD x = TensorD::from({3}, {1, -2, 3});
    x.set_requires_grad(true);
    Tape<double> tape;
    auto loss = ops::sum_all(ops::mul(x, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(-4.0));
    CHECK(x.grad()[2] == doctest::Approx(6.0));
}

TEST_CASE("backward misuse is rejected") {
    TensorD x = TensorD::from({3}, {1, 2, 3});
    x.set_requires_grad(true);
    SUBCASE("second backward on the same tape") {
        Tape<double> tape;
        auto loss = ops::sum_all(x);
        tape.backward(loss);
        CHECK_THROWS_AS(tape.backward(loss), Error);
    }
    SUBCASE("non-scalar loss") {
        Tape<double> tape;
        auto y = ops::mul(x, x);
        CHECK_THROWS_AS(tape.backward(y), ShapeError);
    }
    SUBCASE("detached graph") {
        TensorD computed;
        {
            Tape<double> other;
            computed = ops::sum_all(x);
        }
        Tape<double> tape;
        CHECK_THROWS_AS(tape.backward(computed), Error);
    }
}

TEST_CASE("non-finite op results surface as errors") {
    TensorF x = TensorF::from({1}, {3e38f});
    CHECK_THROWS_AS(ops::affine(x, 100.0f, 0.0f), NumericError);
}

TEST_CASE("MRT1 round trip is bit exact") {
    auto dir = temp_dir("mrt");
    Rng rng(1);
    SUBCASE("f32") {
        auto t = random_tensor<float>({3, 4, 2}, rng);
        write_mrt(dir / "a.mrt", t);
        CHECK(peek_mrt_dtype(dir / "a.mrt") == DType::f32);
        auto back = read_mrt<float>(dir / "a.mrt");
        REQUIRE(back.shape() == t.shape());
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(back.at(i) == t.at(i));
    }
    SUBCASE("f64") {
        auto t = random_tensor<double>({5}, rng);
        write_mrt(dir / "b.mrt", t);
        CHECK(peek_mrt_dtype(dir / "b.mrt") == DType::f64);
        auto back = read_mrt<double>(dir / "b.mrt");
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(back.at(i) == t.at(i));
    }
    SUBCASE("dtype mismatch is rejected") {
        auto t = random_tensor<float>({2}, rng);
        write_mrt(dir / "c.mrt", t);
        CHECK_THROWS_AS(read_mrt<double>(dir / "c.mrt"), IoError);
    }
    SUBCASE("bad magic is rejected") {
        std::ofstream out(dir / "bad.mrt", std::ios::binary);
        out << "NOPE  ";
        out.close();
        CHECK_THROWS_AS(read_mrt<float>(dir / "bad.mrt"), IoError);
    }
}

TEST_CASE("scatter of gather under a permutation restores the tensor") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 3 + rng.randint(6);
        auto x = random_tensor<double>({n, 4}, rng);
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.randint(i)]);
        auto gathered = ops::gather_rows(x, perm);
        auto restored = ops::scatter_rows(gathered, perm, n);
        CHECK(testutil::max_abs_diff(x, restored) == 0.0);
    }
}

TEST_CASE("allocation stats track live tensor bytes") {
    const auto before = alloc_stats::current_bytes();
    alloc_stats::reset_peak();
    {
        TensorD big = TensorD::zeros({1000});
        CHECK(alloc_stats::current_bytes() >= before + 8000);
        CHECK(alloc_stats::peak_bytes() >= before + 8000);
    }
    CHECK(alloc_stats::current_bytes() == before);
}
