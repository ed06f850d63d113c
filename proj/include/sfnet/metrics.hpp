#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfnet/distribution.hpp"
#include "sfnet/errors.hpp"
#include "sfnet/matrix.hpp"

namespace sfnet {

// Metrics for one model on one evaluation split.
struct EvalReport {
    double micro_auc = 0.0;
    double accuracy = 0.0;
    std::map<int, double> top_k_accuracy;  // k in {1, 2, 3}
    double avg_log_likelihood = 0.0;
    size_t n_examples = 0;
    std::map<std::string, size_t> per_class_counts;
};

namespace detail {

// Pooled one-vs-rest flattening: every (example, class) pair contributes a
// score p(class) with a positive label iff the class is the true one.
inline void flatten_one_vs_rest(const Matrix& probs, const std::vector<uint32_t>& targets,
                                std::vector<double>& scores, std::vector<int>& labels) {
    const size_t n = probs.rows();
    const size_t k = probs.cols();
    scores.reserve(n * k);
    labels.reserve(n * k);
    for (size_t i = 0; i < n; ++i) {
        auto row = probs.row(i);
        for (size_t j = 0; j < k; ++j) {
            scores.push_back(row[j]);
            labels.push_back(targets[i] == j ? 1 : 0);
        }
    }
}

// Mann-Whitney rank statistic with midrank tie handling.
inline double rank_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    double positive_rank_sum = 0.0;
    size_t n_pos = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (size_t t = i; t < j; ++t) {
            if (labels[order[t]] == 1) {
                positive_rank_sum += midrank;
                ++n_pos;
            }
        }
        i = j;
    }
    const size_t n_neg = n - n_pos;
    check(n_pos > 0 && n_neg > 0, "micro_auc: need both positive and negative labels");
    return (positive_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Rank of the target class with ties broken by ascending class index.
inline size_t target_rank(std::span<const double> row, uint32_t target) {
    size_t rank = 0;
    for (size_t j = 0; j < row.size(); ++j) {
        if (row[j] > row[target] || (row[j] == row[target] && j < target)) ++rank;
    }
    return rank;
}

}  // namespace detail

// Micro-averaged area under the ROC curve over pooled one-vs-rest pairs.
inline double micro_auc(const Matrix& probs, const std::vector<uint32_t>& targets) {
    check(probs.rows() > 0 && probs.rows() == targets.size(),
          "micro_auc: predictions and targets must align and be nonempty");
    std::vector<double> scores;
    std::vector<int> labels;
    detail::flatten_one_vs_rest(probs, targets, scores, labels);
    return detail::rank_auc(scores, labels);
}

inline double micro_auc(const std::vector<OutputDistribution>& predictions,
                        const std::vector<uint32_t>& targets) {
    check(!predictions.empty(), "micro_auc: empty predictions");
    Matrix probs(predictions.size(), predictions[0].size());
    for (size_t i = 0; i < predictions.size(); ++i) {
        std::copy(predictions[i].probs.begin(), predictions[i].probs.end(), probs.row(i).begin());
    }
    return micro_auc(probs, targets);
}

inline double top_k_accuracy(const Matrix& probs, const std::vector<uint32_t>& targets, size_t k) {
    check(k >= 1, "top_k_accuracy: k must be at least 1");
    check(probs.rows() == targets.size() && probs.rows() > 0,
          "top_k_accuracy: predictions and targets must align and be nonempty");
    size_t hits = 0;
    for (size_t i = 0; i < probs.rows(); ++i) {
        if (detail::target_rank(probs.row(i), targets[i]) < k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

inline double avg_log_likelihood(const Matrix& probs, const std::vector<uint32_t>& targets) {
    check(probs.rows() == targets.size() && probs.rows() > 0,
          "avg_log_likelihood: predictions and targets must align and be nonempty");
    double total = 0.0;
    for (size_t i = 0; i < probs.rows(); ++i) {
        total += std::log(std::max(probs(i, targets[i]), kProbFloor));
    }
    return total / static_cast<double>(probs.rows());
}

// Monotone staircase from (0,0) to (1,1); tied scores are grouped so the
// trapezoidal area equals the midrank AUC exactly.
inline std::vector<std::pair<double, double>> roc_points(const Matrix& probs,
                                                         const std::vector<uint32_t>& targets) {
    std::vector<double> scores;
    std::vector<int> labels;
    detail::flatten_one_vs_rest(probs, targets, scores, labels);

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    double n_pos = 0;
    double n_neg = 0;
    for (int l : labels) (l == 1 ? n_pos : n_neg) += 1.0;
    check(n_pos > 0 && n_neg > 0, "roc_points: need both positive and negative labels");

    std::vector<std::pair<double, double>> points;
    points.emplace_back(0.0, 0.0);
    double tp = 0;
    double fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (size_t t = i; t < j; ++t) {
            if (labels[order[t]] == 1) {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
        }
        points.emplace_back(fp / n_neg, tp / n_pos);
        i = j;
    }
    return points;
}

inline double trapezoid_area(const std::vector<std::pair<double, double>>& points) {
    double area = 0.0;
    for (size_t i = 1; i < points.size(); ++i) {
        area += 0.5 * (points[i].first - points[i - 1].first) *
                (points[i].second + points[i - 1].second);
    }
    return area;
}

inline EvalReport make_report(const Matrix& probs, const std::vector<uint32_t>& targets,
                              const std::vector<std::string>& outcome_labels) {
    EvalReport report;
    report.n_examples = probs.rows();
    report.micro_auc = micro_auc(probs, targets);
    report.accuracy = top_k_accuracy(probs, targets, 1);
    for (int k : {1, 2, 3}) {
        report.top_k_accuracy[k] = top_k_accuracy(probs, targets, static_cast<size_t>(k));
    }
    report.avg_log_likelihood = avg_log_likelihood(probs, targets);
    for (uint32_t t : targets) ++report.per_class_counts[outcome_labels.at(t)];
    return report;
}

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;
};

struct AggregateReport {
    size_t n_trials = 0;
    std::map<std::string, MetricSummary> metrics;
};

// Mean and sample (n-1) standard deviation per metric.
inline AggregateReport aggregate_trials(const std::vector<EvalReport>& reports) {
    check(reports.size() >= 2, "aggregate_trials: need at least 2 reports");
    AggregateReport out;
    out.n_trials = reports.size();

    auto summarize = [&](const std::string& name, auto getter) {
        double mean = 0.0;
        for (const auto& r : reports) mean += getter(r);
        mean /= static_cast<double>(reports.size());
        double ss = 0.0;
        for (const auto& r : reports) {
            const double d = getter(r) - mean;
            ss += d * d;
        }
        out.metrics[name] = {mean, std::sqrt(ss / static_cast<double>(reports.size() - 1))};
    };
    summarize("micro_auc", [](const EvalReport& r) { return r.micro_auc; });
    summarize("accuracy", [](const EvalReport& r) { return r.accuracy; });
    summarize("top_1", [](const EvalReport& r) { return r.top_k_accuracy.at(1); });
    summarize("top_2", [](const EvalReport& r) { return r.top_k_accuracy.at(2); });
    summarize("top_3", [](const EvalReport& r) { return r.top_k_accuracy.at(3); });
    summarize("avg_log_likelihood", [](const EvalReport& r) { return r.avg_log_likelihood; });
    return out;
}

// "0.689 ± 0.005" style
inline std::string format_mean_std(const MetricSummary& m) {
    char buf[64];
    snprintf(buf, sizeof(buf), "%.3f ± %.3f", m.mean, m.std);
    return buf;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    std::map<std::string, double> top_k;
    for (const auto& [k, v] : r.top_k_accuracy) top_k[std::to_string(k)] = v;
    return nlohmann::json{{"micro_auc", r.micro_auc},
                          {"accuracy", r.accuracy},
                          {"top_k_accuracy", top_k},
                          {"avg_log_likelihood", r.avg_log_likelihood},
                          {"n_examples", r.n_examples},
                          {"per_class_counts", r.per_class_counts}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.micro_auc = j.at("micro_auc").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    for (const auto& [k, v] : j.at("top_k_accuracy").items()) {
        r.top_k_accuracy[std::stoi(k)] = v.get<double>();
    }
    r.avg_log_likelihood = j.at("avg_log_likelihood").get<double>();
    r.n_examples = j.at("n_examples").get<size_t>();
    r.per_class_counts =
        j.at("per_class_counts").get<std::map<std::string, size_t>>();
    return r;
}

inline nlohmann::json aggregate_to_json(const AggregateReport& a) {
    nlohmann::json metrics;
    for (const auto& [name, m] : a.metrics) {
        metrics[name] = {{"mean", m.mean}, {"std", m.std}};
    }
    return nlohmann::json{{"n_trials", a.n_trials}, {"metrics", metrics}};
}

}  // namespace sfnet
