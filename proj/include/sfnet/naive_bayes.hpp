#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfnet/distribution.hpp"
#include "sfnet/errors.hpp"
#include "sfnet/matrix.hpp"
#include "sfnet/schema.hpp"

namespace sfnet {

// Categorical Naive Bayes with additive (Laplace) smoothing over each field's
// vocabulary. Continuous features are excluded by construction. Priors are
// the raw class frequencies; smoothing applies to the conditionals, where
// rare and unseen values would otherwise zero out a whole product.
struct NBModel {
    double alpha = 1.0;
    std::vector<std::string> outcome_labels;
    std::vector<double> class_counts;
    double total_count = 0.0;

    struct FieldTable {
        std::string name;
        bool customer_side = true;
        size_t position = 0;    // index into the schema's categorical list
        size_t vocab_size = 0;
        Matrix counts;          // k x vocab_size
    };
    std::vector<FieldTable> fields;

    OutputDistribution predict(const EncodedExample& example) const {
        const size_t k = outcome_labels.size();
        std::vector<double> log_post(k);
        for (size_t c = 0; c < k; ++c) {
            double lp = std::log(class_counts[c]) - std::log(total_count);
            for (const auto& f : fields) {
                const uint32_t v = f.customer_side ? example.customer_cat[f.position]
                                                   : example.article_cat[f.position];
                check(v < f.vocab_size, "NBModel::predict: index out of vocabulary range");
                const double num = f.counts(c, v) + alpha;
                const double den = class_counts[c] + alpha * static_cast<double>(f.vocab_size);
                lp += std::log(num) - std::log(den);
            }
            log_post[c] = lp;
        }
        double max_lp = log_post[0];
        for (double lp : log_post) max_lp = std::max(max_lp, lp);
        OutputDistribution out;
        out.probs.resize(k);
        double sum = 0.0;
        for (size_t c = 0; c < k; ++c) {
            out.probs[c] = std::exp(log_post[c] - max_lp);
            sum += out.probs[c];
        }
        for (double& p : out.probs) p /= sum;
        return out;
    }
};

inline NBModel naive_bayes_fit(const std::vector<EncodedExample>& train,
                               const FeatureSchema& schema, double alpha = 1.0) {
    check(!train.empty(), "naive_bayes_fit: empty training set");
    check(alpha > 0.0, "naive_bayes_fit: smoothing must be positive");

    NBModel model;
    model.alpha = alpha;
    model.outcome_labels = schema.outcome_labels;
    const size_t k = schema.n_outcomes();
    model.class_counts.assign(k, 0.0);

    for (size_t i = 0; i < schema.customer_categorical.size(); ++i) {
        const auto& f = schema.customer_categorical[i];
        model.fields.push_back({f.name, true, i, f.values.size(), Matrix(k, f.values.size())});
    }
    for (size_t i = 0; i < schema.article_categorical.size(); ++i) {
        const auto& f = schema.article_categorical[i];
        model.fields.push_back({f.name, false, i, f.values.size(), Matrix(k, f.values.size())});
    }

    for (const auto& ex : train) {
        check(ex.outcome < k, "naive_bayes_fit: outcome out of range");
        model.class_counts[ex.outcome] += 1.0;
        model.total_count += 1.0;
        for (auto& f : model.fields) {
            const uint32_t v = f.customer_side ? ex.customer_cat[f.position]
                                               : ex.article_cat[f.position];
            f.counts(ex.outcome, v) += 1.0;
        }
    }
    return model;
}

inline nlohmann::json nb_to_json(const NBModel& m) {
    nlohmann::json fields = nlohmann::json::array();
    for (const auto& f : m.fields) {
        std::vector<std::vector<double>> counts(f.counts.rows());
        for (size_t c = 0; c < f.counts.rows(); ++c) {
            counts[c].assign(f.counts.row(c).begin(), f.counts.row(c).end());
        }
        fields.push_back({{"name", f.name},
                          {"customer_side", f.customer_side},
                          {"position", f.position},
                          {"vocab_size", f.vocab_size},
                          {"counts", counts}});
    }
    return nlohmann::json{{"model_type", "naive_bayes"},
                          {"alpha", m.alpha},
                          {"outcome_labels", m.outcome_labels},
                          {"class_counts", m.class_counts},
                          {"total_count", m.total_count},
                          {"fields", fields}};
}

inline NBModel nb_from_json(const nlohmann::json& j) {
    if (j.value("model_type", "") != "naive_bayes") {
        throw data_error("nb_from_json: not a naive_bayes model document");
    }
    NBModel m;
    m.alpha = j.at("alpha").get<double>();
    m.outcome_labels = j.at("outcome_labels").get<std::vector<std::string>>();
    m.class_counts = j.at("class_counts").get<std::vector<double>>();
    m.total_count = j.at("total_count").get<double>();
    for (const auto& f : j.at("fields")) {
        NBModel::FieldTable table;
        table.name = f.at("name").get<std::string>();
        table.customer_side = f.at("customer_side").get<bool>();
        table.position = f.at("position").get<size_t>();
        table.vocab_size = f.at("vocab_size").get<size_t>();
        const auto counts = f.at("counts").get<std::vector<std::vector<double>>>();
        table.counts = Matrix(counts.size(), table.vocab_size);
        for (size_t c = 0; c < counts.size(); ++c) {
            std::copy(counts[c].begin(), counts[c].end(), table.counts.row(c).begin());
        }
        m.fields.push_back(std::move(table));
    }
    return m;
}

}  // namespace sfnet
