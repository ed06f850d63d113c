#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "sfnet/distribution.hpp"
#include "sfnet/rng.hpp"
#include "sfnet/tape.hpp"
#include "support/oracles.hpp"

using sfnet::Matrix;
using sfnet::OutputDistribution;
using sfnet::Param;
using sfnet::Tape;

TEST_CASE("softmax shift invariance and constants") {
    for (double c : {-3.0, 0.0, 7.5}) {
        std::vector<double> logits(5, c);
        OutputDistribution d = sfnet::softmax(logits);
        for (double p : d.probs) REQUIRE(p == Catch::Approx(0.2).margin(1e-15));
    }
}

TEST_CASE("softmax is numerically stable at large magnitudes") {
    OutputDistribution d = sfnet::softmax(std::vector<double>{1000.0, 0.0});
    REQUIRE(d.probs[0] == Catch::Approx(1.0));
    REQUIRE(d.probs[1] >= 0.0);
    REQUIRE(std::isfinite(d.probs[0]));
    REQUIRE(std::isfinite(d.probs[1]));

    double sum = d.probs[0] + d.probs[1];
    REQUIRE(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("softmax forced arithmetic") {
    std::vector<double> logits = {std::log(1.0), std::log(2.0), std::log(3.0)};
    OutputDistribution d = sfnet::softmax(logits);
    REQUIRE(d.probs[0] == Catch::Approx(1.0 / 6.0).epsilon(1e-12));
    REQUIRE(d.probs[1] == Catch::Approx(2.0 / 6.0).epsilon(1e-12));
    REQUIRE(d.probs[2] == Catch::Approx(3.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("softmax output lies on the simplex for extreme logits") {
    sfnet::Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> logits(4);
        for (double& v : logits) v = rng.uniform(-1e3, 1e3);
        OutputDistribution d = sfnet::softmax(logits);
        double sum = 0.0;
        for (double p : d.probs) {
            REQUIRE(p >= 0.0);
            sum += p;
        }
        REQUIRE(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("softmax rejects fewer than two classes") {
    REQUIRE_THROWS_AS(sfnet::softmax(std::vector<double>{1.0}), sfnet::contract_error);
}

TEST_CASE("cross entropy values") {
    OutputDistribution uniform{{1.0 / 3, 1.0 / 3, 1.0 / 3}};
    for (size_t t = 0; t < 3; ++t) {
        REQUIRE(sfnet::cross_entropy(uniform, t) == Catch::Approx(std::log(3.0)).epsilon(1e-12));
    }

    OutputDistribution perfect{{0.0, 1.0}};
    REQUIRE(sfnet::cross_entropy(perfect, 1) == 0.0);

    OutputDistribution d{{0.7, 0.3}};
    REQUIRE(sfnet::cross_entropy(d, 1) == Catch::Approx(1.2039728043259361).epsilon(1e-12));

    REQUIRE_THROWS_AS(sfnet::cross_entropy(d, 2), sfnet::contract_error);
}

TEST_CASE("cross entropy is floored for zero probability") {
    OutputDistribution d{{1.0, 0.0}};
    REQUIRE(sfnet::cross_entropy(d, 1) == Catch::Approx(-std::log(1e-12)));
}

TEST_CASE("backward on a scalar chain matches finite differences") {
    // y = tanh(w * x) at w = 0.3, x = 1.5
    Param w("w", Matrix{{0.3}});
    Matrix x{{1.5}};

    auto loss_value = [&]() {
        Tape t;
        sfnet::NodeId xw = t.matmul(t.constant(x), t.parameter(w));
        sfnet::NodeId y = t.tanh(xw);
        return t.value(y)(0, 0);
    };

    w.zero_grad();
    Tape t;
    sfnet::NodeId xw = t.matmul(t.constant(x), t.parameter(w));
    sfnet::NodeId y = t.tanh(xw);
    t.backward(y);

    double fd = oracle::central_difference(loss_value, w.value(0, 0), 1e-5);
    REQUIRE(oracle::relative_error(w.grad(0, 0), fd) < 1e-6);
}

TEST_CASE("parameters untouched by the loss keep zero gradient") {
    Param used("used", Matrix{{0.25, -0.5}});
    Param unused("unused", Matrix{{1.0, 2.0}});
    used.zero_grad();
    unused.zero_grad();

    Tape t;
    sfnet::NodeId a = t.parameter(used);
    sfnet::NodeId loss = t.matmul(a, t.constant(Matrix{{1.0}, {1.0}}));
    t.backward(loss);

    REQUIRE(unused.grad(0, 0) == 0.0);
    REQUIRE(unused.grad(0, 1) == 0.0);
    REQUIRE(used.grad(0, 0) == 1.0);
    REQUIRE(used.grad(0, 1) == 1.0);
}

TEST_CASE("backward rejects non-scalar or foreign nodes") {
    Tape t;
    sfnet::NodeId m = t.constant(Matrix(2, 2));
    REQUIRE_THROWS_AS(t.backward(m), sfnet::contract_error);
    REQUIRE_THROWS_AS(t.backward(m + 100), sfnet::contract_error);
}

TEST_CASE("identical tapes produce bitwise identical gradients") {
    auto run = [](Param& w, Param& b) {
        Tape t;
        sfnet::NodeId x = t.constant(Matrix{{0.3, -1.2}, {0.8, 0.5}});
        sfnet::NodeId h = t.tanh(t.add_row_broadcast(t.matmul(x, t.parameter(w)), t.parameter(b)));
        sfnet::NodeId p = t.softmax_rows(h);
        sfnet::NodeId loss = t.cross_entropy_mean(p, {0, 1});
        t.backward(loss);
        return t.value(loss)(0, 0);
    };

    Param w1("w", Matrix{{0.1, -0.2}, {0.4, 0.3}});
    Param b1("b", Matrix{{0.05, -0.05}});
    Param w2 = w1;
    Param b2 = b1;
    w1.zero_grad();
    b1.zero_grad();
    w2.zero_grad();
    b2.zero_grad();

    double l1 = run(w1, b1);
    double l2 = run(w2, b2);
    REQUIRE(l1 == l2);
    REQUIRE(w1.grad == w2.grad);
    REQUIRE(b1.grad == b2.grad);
}

TEST_CASE("gather and l2 gradients flow into the table") {
    Param table("emb", Matrix{{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}});
    table.zero_grad();

    Tape t;
    sfnet::NodeId g = t.gather_rows(table, {2, 0, 2});
    sfnet::NodeId sum = t.matmul(t.constant(Matrix{{1.0, 1.0, 1.0}}), g);
    sfnet::NodeId collapsed = t.matmul(sum, t.constant(Matrix{{1.0}, {1.0}}));
    sfnet::NodeId reg = t.l2_rows(table, {1}, 0.5);
    std::vector<sfnet::NodeId> parts = {collapsed, reg};
    sfnet::NodeId loss = t.add_scalars(parts);
    t.backward(loss);

    // row 2 referenced twice, row 0 once, row 1 only through the penalty
    REQUIRE(table.grad(2, 0) == 2.0);
    REQUIRE(table.grad(2, 1) == 2.0);
    REQUIRE(table.grad(0, 0) == 1.0);
    REQUIRE(table.grad(1, 0) == Catch::Approx(2.0 * 0.5 * 3.0));
    REQUIRE(table.grad(1, 1) == Catch::Approx(2.0 * 0.5 * 4.0));

    REQUIRE_THROWS_AS(
        [&] {
            Tape bad;
            bad.gather_rows(table, {3});
        }(),
        sfnet::contract_error);
}

TEST_CASE("truncate_renormalize") {
    OutputDistribution d{{0.5, 0.3, 0.2}};

    SECTION("forced arithmetic") {
        OutputDistribution out = sfnet::truncate_renormalize(d, {0, 2});
        REQUIRE(out.probs[0] == Catch::Approx(5.0 / 7.0).epsilon(1e-12));
        REQUIRE(out.probs[1] == 0.0);
        REQUIRE(out.probs[2] == Catch::Approx(2.0 / 7.0).epsilon(1e-12));
    }

    SECTION("all classes available is identity") {
        OutputDistribution out = sfnet::truncate_renormalize(d, {0, 1, 2});
        for (size_t i = 0; i < 3; ++i) {
            REQUIRE(out.probs[i] == Catch::Approx(d.probs[i]).epsilon(1e-12));
        }
    }

    SECTION("single class takes all mass") {
        OutputDistribution out = sfnet::truncate_renormalize(d, {1});
        REQUIRE(out.probs[1] == 1.0);
    }

    SECTION("negligible surviving mass becomes uniform") {
        OutputDistribution z{{1.0, 0.0, 0.0}};
        OutputDistribution out = sfnet::truncate_renormalize(z, {1, 2});
        REQUIRE(out.probs[1] == Catch::Approx(0.5));
        REQUIRE(out.probs[2] == Catch::Approx(0.5));
    }

    SECTION("empty availability is rejected") {
        REQUIRE_THROWS_AS(sfnet::truncate_renormalize(d, {}), sfnet::contract_error);
    }

    SECTION("surviving order is preserved") {
        sfnet::Rng rng(3);
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<double> logits(5);
            for (double& v : logits) v = rng.uniform(-4.0, 4.0);
            OutputDistribution full = sfnet::softmax(logits);
            std::vector<size_t> avail = {0, 2, 4};
            OutputDistribution out = sfnet::truncate_renormalize(full, avail);
            for (size_t a : avail) {
                for (size_t b : avail) {
                    if (full.probs[a] < full.probs[b]) {
                        REQUIRE(out.probs[a] <= out.probs[b]);
                    }
                }
            }
        }
    }
}
