#include <catch2/catch_amalgamated.hpp>

#include "sfnet/matrix.hpp"
#include "sfnet/rng.hpp"
#include "support/oracles.hpp"

using sfnet::Matrix;

TEST_CASE("matmul identity leaves operand unchanged") {
    Matrix m{{1.5, -2.0, 3.0}, {0.0, 4.0, -1.0}, {2.0, 2.0, 2.0}};
    Matrix out = sfnet::matmul(Matrix::identity(3), m);
    REQUIRE(out == m);
}

TEST_CASE("matmul hand arithmetic") {
    Matrix a{{1, 2}, {3, 4}};
    Matrix b{{1}, {1}};
    Matrix out = sfnet::matmul(a, b);
    REQUIRE(out.rows() == 2);
    REQUIRE(out.cols() == 1);
    REQUIRE(out(0, 0) == 3.0);
    REQUIRE(out(1, 0) == 7.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
    sfnet::Rng rng(42);
    Matrix a(5, 4);
    Matrix b(4, 3);
    for (size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-2.0, 2.0);
    for (size_t i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-2.0, 2.0);

    Matrix fast = sfnet::matmul(a, b);
    Matrix slow = oracle::matmul_naive(a, b);
    for (size_t i = 0; i < fast.size(); ++i) {
        REQUIRE(std::abs(fast.data()[i] - slow.data()[i]) < 1e-12);
    }
}

TEST_CASE("matmul rejects mismatched shapes") {
    Matrix a(2, 3);
    Matrix b(2, 3);
    REQUIRE_THROWS_AS(sfnet::matmul(a, b), sfnet::contract_error);
}

TEST_CASE("tanh_forward basics") {
    Matrix x{{0.0, 1000.0, -1000.0, 0.5}};
    Matrix y = sfnet::tanh_forward(x);
    REQUIRE(y(0, 0) == 0.0);
    REQUIRE(y(0, 1) == 1.0);
    REQUIRE(y(0, 2) == -1.0);
    REQUIRE(y.all_finite());

    // odd symmetry: tanh(-x) == -tanh(x) exactly
    Matrix neg = x;
    for (size_t i = 0; i < neg.size(); ++i) neg.data()[i] = -neg.data()[i];
    Matrix yn = sfnet::tanh_forward(neg);
    for (size_t i = 0; i < y.size(); ++i) {
        REQUIRE(yn.data()[i] == -y.data()[i]);
    }

    // outputs stay inside (-1, 1) for finite moderate inputs
    REQUIRE(std::abs(y(0, 3)) < 1.0);
}
