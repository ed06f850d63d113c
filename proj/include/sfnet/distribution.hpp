#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "sfnet/errors.hpp"

namespace sfnet {

// Lower bound on any probability fed into a logarithm. Bounds the loss and
// the log-likelihood metric when a model is confidently wrong.
inline constexpr double kProbFloor = 1e-12;

// Point on the probability simplex over k outcome classes.
struct OutputDistribution {
    std::vector<double> probs;

    size_t size() const { return probs.size(); }
    double operator[](size_t i) const { return probs[i]; }
};

// In-place stable softmax over a contiguous range of logits.
inline void softmax_inplace(std::span<double> values) {
    double max_v = values[0];
    for (double v : values) max_v = std::max(max_v, v);
    double sum = 0.0;
    for (double& v : values) {
        v = std::exp(v - max_v);
        sum += v;
    }
    for (double& v : values) v /= sum;
}

inline OutputDistribution softmax(std::span<const double> logits) {
    check(logits.size() >= 2, "softmax: need at least 2 classes");
    OutputDistribution out;
    out.probs.assign(logits.begin(), logits.end());
    softmax_inplace(out.probs);
    return out;
}

inline OutputDistribution softmax(const std::vector<double>& logits) {
    return softmax(std::span<const double>(logits));
}

// -ln(p[target]), floored at kProbFloor.
inline double cross_entropy(const OutputDistribution& dist, size_t target) {
    check(target < dist.size(), "cross_entropy: target class out of range");
    return -std::log(std::max(dist.probs[target], kProbFloor));
}

// Restrict a distribution to the available classes and rescale. If the
// surviving mass is negligible, falls back to uniform over the survivors.
inline OutputDistribution truncate_renormalize(const OutputDistribution& dist,
                                               const std::vector<size_t>& available) {
    check(!available.empty(), "truncate_renormalize: empty set of available classes");
    OutputDistribution out;
    out.probs.assign(dist.size(), 0.0);
    double mass = 0.0;
    for (size_t idx : available) {
        check(idx < dist.size(), "truncate_renormalize: class index out of range");
        out.probs[idx] = dist.probs[idx];
        mass += dist.probs[idx];
    }
    if (mass < kProbFloor) {
        const double uniform = 1.0 / static_cast<double>(available.size());
        for (size_t idx : available) out.probs[idx] = uniform;
    } else {
        for (double& p : out.probs) p /= mass;
    }
    return out;
}

}  // namespace sfnet
