#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "sfnet/errors.hpp"
#include "sfnet/record.hpp"
#include "sfnet/rng.hpp"

namespace sfnet {

enum class SplitMode { random, chronological };

inline std::string split_mode_name(SplitMode m) {
    return m == SplitMode::random ? "random" : "chronological";
}

inline SplitMode split_mode_by_name(const std::string& name) {
    if (name == "random") return SplitMode::random;
    if (name == "chronological" || name == "chrono") return SplitMode::chronological;
    throw config_error("unknown split mode: " + name);
}

struct SplitSpec {
    double train_fraction = 0.8;
    double validation_fraction = 0.1;
    double test_fraction = 0.1;
    SplitMode mode = SplitMode::random;
    uint64_t seed = 0;

    void validate() const {
        check(train_fraction >= 0 && validation_fraction >= 0 && test_fraction >= 0,
              "SplitSpec: fractions must be non-negative");
        check(std::abs(train_fraction + validation_fraction + test_fraction - 1.0) < 1e-9,
              "SplitSpec: fractions must sum to 1");
    }
};

struct SplitIndices {
    std::vector<size_t> train;
    std::vector<size_t> validation;
    std::vector<size_t> test;
};

// Random mode: seeded shuffle then partition. Chronological mode: sort by
// timestamp so the test partition holds the latest records. Partitions are
// disjoint and exhaustive either way.
inline SplitIndices split(const std::vector<InteractionRecord>& records, const SplitSpec& spec) {
    spec.validate();
    const size_t n = records.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    if (spec.mode == SplitMode::random) {
        Rng rng(spec.seed);
        rng.shuffle(order);
    } else {
        size_t missing = 0;
        for (const auto& r : records) {
            if (!r.timestamp) ++missing;
        }
        check(missing == 0, "split: chronological mode but " + std::to_string(missing) +
                                " records lack timestamps");
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return *records[a].timestamp < *records[b].timestamp;
        });
    }

    const auto n_train = static_cast<size_t>(
        std::llround(spec.train_fraction * static_cast<double>(n)));
    const auto n_val = std::min(
        n - n_train,
        static_cast<size_t>(std::llround(spec.validation_fraction * static_cast<double>(n))));

    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + n_train);
    out.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    out.test.assign(order.begin() + n_train + n_val, order.end());
    return out;
}

}  // namespace sfnet
