#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "sfnet/metrics.hpp"
#include "sfnet/rng.hpp"
#include "support/oracles.hpp"

using namespace sfnet;

namespace {

// random simplex rows
Matrix random_probs(size_t n, size_t k, Rng& rng) {
    Matrix probs(n, k);
    for (size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        auto row = probs.row(i);
        for (size_t j = 0; j < k; ++j) {
            row[j] = rng.uniform(0.001, 1.0);
            sum += row[j];
        }
        for (size_t j = 0; j < k; ++j) row[j] /= sum;
    }
    return probs;
}

std::vector<uint32_t> random_targets(size_t n, size_t k, Rng& rng) {
    std::vector<uint32_t> t(n);
    for (auto& v : t) v = static_cast<uint32_t>(rng.uniform_below(k));
    return t;
}

double oracle_micro_auc(const Matrix& probs, const std::vector<uint32_t>& targets) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (size_t i = 0; i < probs.rows(); ++i) {
        for (size_t j = 0; j < probs.cols(); ++j) {
            scores.push_back(probs(i, j));
            labels.push_back(targets[i] == j ? 1 : 0);
        }
    }
    return oracle::auc_pair_counting(scores, labels);
}

}  // namespace

TEST_CASE("micro_auc is 1 for perfect predictions") {
    Matrix probs(6, 3);
    std::vector<uint32_t> targets;
    for (size_t i = 0; i < 6; ++i) {
        probs(i, i % 3) = 1.0;
        targets.push_back(static_cast<uint32_t>(i % 3));
    }
    REQUIRE(micro_auc(probs, targets) == Catch::Approx(1.0));
}

TEST_CASE("micro_auc is one half for uniform predictions") {
    Matrix probs(9, 3, 1.0 / 3.0);
    std::vector<uint32_t> targets = {0, 1, 2, 0, 1, 2, 0, 0, 1};
    REQUIRE(micro_auc(probs, targets) == Catch::Approx(0.5));
}

TEST_CASE("micro_auc matches the quadratic pair-counting oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t n = 10 + rng.uniform_below(41);
        const size_t k = 2 + rng.uniform_below(2);  // 2 or 3
        Matrix probs = random_probs(n, k, rng);
        auto targets = random_targets(n, k, rng);
        const double fast = micro_auc(probs, targets);
        const double slow = oracle_micro_auc(probs, targets);
        REQUIRE(std::abs(fast - slow) < 1e-12);
    }
}

TEST_CASE("micro_auc with heavy ties matches the oracle") {
    Rng rng(77);
    Matrix probs(50, 3);
    for (size_t i = 0; i < probs.size(); ++i) {
        probs.data()[i] = 0.25 * static_cast<double>(rng.uniform_below(4));  // lots of ties
    }
    auto targets = random_targets(50, 3, rng);
    REQUIRE(std::abs(micro_auc(probs, targets) - oracle_micro_auc(probs, targets)) < 1e-12);
}

TEST_CASE("micro_auc is invariant under strictly increasing transforms") {
    Rng rng(5);
    Matrix probs = random_probs(40, 3, rng);
    auto targets = random_targets(40, 3, rng);
    const double base = micro_auc(probs, targets);

    Matrix transformed = probs;
    for (size_t i = 0; i < transformed.size(); ++i) {
        transformed.data()[i] = std::exp(2.0 * transformed.data()[i]) + 3.0;
    }
    REQUIRE(micro_auc(transformed, targets) == Catch::Approx(base).epsilon(1e-12));
}

TEST_CASE("complementing binary labels flips the AUC") {
    Rng rng(17);
    Matrix probs = random_probs(30, 2, rng);
    auto targets = random_targets(30, 2, rng);
    std::vector<uint32_t> flipped;
    for (uint32_t t : targets) flipped.push_back(1 - t);
    REQUIRE(micro_auc(probs, targets) + micro_auc(probs, flipped) == Catch::Approx(1.0));
}

TEST_CASE("micro_auc accepts a list of output distributions") {
    Rng rng(61);
    Matrix probs = random_probs(20, 3, rng);
    auto targets = random_targets(20, 3, rng);
    std::vector<OutputDistribution> dists;
    for (size_t i = 0; i < probs.rows(); ++i) {
        OutputDistribution d;
        d.probs.assign(probs.row(i).begin(), probs.row(i).end());
        dists.push_back(d);
    }
    REQUIRE(micro_auc(dists, targets) == micro_auc(probs, targets));
}

TEST_CASE("micro_auc stays within the unit interval") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix probs = random_probs(25, 3, rng);
        auto targets = random_targets(25, 3, rng);
        const double auc = micro_auc(probs, targets);
        REQUIRE(auc >= 0.0);
        REQUIRE(auc <= 1.0);
    }
}

TEST_CASE("top_k_accuracy basics") {
    // true class always ranked second
    Matrix probs{{0.5, 0.3, 0.2}, {0.6, 0.25, 0.15}};
    std::vector<uint32_t> targets = {1, 1};
    REQUIRE(top_k_accuracy(probs, targets, 1) == 0.0);
    REQUIRE(top_k_accuracy(probs, targets, 2) == 1.0);

    // k >= number of classes is always 1
    REQUIRE(top_k_accuracy(probs, targets, 3) == 1.0);
    REQUIRE(top_k_accuracy(probs, targets, 10) == 1.0);

    REQUIRE_THROWS_AS(top_k_accuracy(probs, targets, 0), contract_error);
}

TEST_CASE("top_k ties resolve by ascending class index") {
    Matrix probs{{0.4, 0.4, 0.2}};
    // class 0 wins the tie against class 1
    REQUIRE(top_k_accuracy(probs, {0}, 1) == 1.0);
    REQUIRE(top_k_accuracy(probs, {1}, 1) == 0.0);
    REQUIRE(top_k_accuracy(probs, {1}, 2) == 1.0);
}

TEST_CASE("top_k_accuracy is non-decreasing in k") {
    Rng rng(41);
    Matrix probs = random_probs(30, 5, rng);
    auto targets = random_targets(30, 5, rng);
    double prev = 0.0;
    for (size_t k = 1; k <= 5; ++k) {
        const double acc = top_k_accuracy(probs, targets, k);
        REQUIRE(acc >= prev);
        prev = acc;
    }
    REQUIRE(prev == 1.0);
}

TEST_CASE("avg_log_likelihood values") {
    Matrix uniform(4, 3, 1.0 / 3.0);
    std::vector<uint32_t> targets = {0, 1, 2, 0};
    REQUIRE(avg_log_likelihood(uniform, targets) ==
            Catch::Approx(-std::log(3.0)).epsilon(1e-12));

    Matrix perfect(2, 3);
    perfect(0, 1) = 1.0;
    perfect(1, 2) = 1.0;
    REQUIRE(avg_log_likelihood(perfect, {1, 2}) == 0.0);

    // floored at ln(1e-12)
    Matrix zero(1, 2);
    zero(0, 0) = 1.0;
    REQUIRE(avg_log_likelihood(zero, {1}) == Catch::Approx(std::log(1e-12)));
}

TEST_CASE("roc points form a staircase whose area is the AUC") {
    Rng rng(53);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix probs = random_probs(30, 3, rng);
        auto targets = random_targets(30, 3, rng);
        auto points = roc_points(probs, targets);

        REQUIRE(points.front() == std::pair<double, double>{0.0, 0.0});
        REQUIRE(points.back().first == Catch::Approx(1.0));
        REQUIRE(points.back().second == Catch::Approx(1.0));
        for (size_t i = 1; i < points.size(); ++i) {
            REQUIRE(points[i].first >= points[i - 1].first);
            REQUIRE(points[i].second >= points[i - 1].second);
        }
        REQUIRE(trapezoid_area(points) ==
                Catch::Approx(micro_auc(probs, targets)).margin(1e-9));
    }
}

TEST_CASE("roc of a perfect classifier passes through (0, 1)") {
    Matrix probs(4, 2);
    std::vector<uint32_t> targets;
    for (size_t i = 0; i < 4; ++i) {
        probs(i, i % 2) = 0.9;
        probs(i, 1 - i % 2) = 0.1;
        targets.push_back(static_cast<uint32_t>(i % 2));
    }
    auto points = roc_points(probs, targets);
    bool hits_corner = false;
    for (const auto& [fpr, tpr] : points) {
        if (fpr == 0.0 && tpr == 1.0) hits_corner = true;
    }
    REQUIRE(hits_corner);
}

TEST_CASE("constant scores give the diagonal") {
    Matrix probs(5, 2, 0.5);
    std::vector<uint32_t> targets = {0, 1, 0, 1, 1};
    auto points = roc_points(probs, targets);
    REQUIRE(points.size() == 2);  // (0,0) then (1,1) in one tie group
    REQUIRE(trapezoid_area(points) == Catch::Approx(0.5));
}

TEST_CASE("aggregate_trials computes mean and sample std") {
    EvalReport a;
    a.micro_auc = 0.6;
    a.accuracy = 0.5;
    a.top_k_accuracy = {{1, 0.5}, {2, 0.7}, {3, 1.0}};
    a.avg_log_likelihood = -1.0;
    a.n_examples = 10;
    EvalReport b = a;
    b.micro_auc = 0.8;

    AggregateReport agg = aggregate_trials({a, b});
    REQUIRE(agg.metrics.at("micro_auc").mean == Catch::Approx(0.7));
    REQUIRE(agg.metrics.at("micro_auc").std == Catch::Approx(0.14142135623730951).epsilon(1e-9));
    REQUIRE(agg.metrics.at("accuracy").std == 0.0);

    AggregateReport same = aggregate_trials({a, a, a});
    REQUIRE(same.metrics.at("micro_auc").std == 0.0);

    REQUIRE_THROWS_AS(aggregate_trials({a}), contract_error);

    REQUIRE(format_mean_std(agg.metrics.at("micro_auc")) == "0.700 ± 0.141");
}

TEST_CASE("eval report json round-trip") {
    EvalReport r;
    r.micro_auc = 0.689;
    r.accuracy = 0.69;
    r.top_k_accuracy = {{1, 0.69}, {2, 0.9}, {3, 1.0}};
    r.avg_log_likelihood = -0.758;
    r.n_examples = 8279;
    r.per_class_counts = {{"Fit", 5000}, {"Large", 1600}, {"Small", 1679}};
    EvalReport back = report_from_json(report_to_json(r));
    REQUIRE(back.micro_auc == r.micro_auc);
    REQUIRE(back.top_k_accuracy == r.top_k_accuracy);
    REQUIRE(back.per_class_counts == r.per_class_counts);
}
