#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfnet/distribution.hpp"
#include "sfnet/errors.hpp"
#include "sfnet/schema.hpp"

namespace sfnet {

// Non-personalized baseline: the empirical outcome distribution within each
// condition cell (e.g. per category), Laplace-smoothed with alpha = 1. Cells
// never seen in training fall back to the global marginal.
struct MarginalModel {
    std::vector<std::string> outcome_labels;
    std::vector<std::string> condition_fields;
    std::vector<std::pair<bool, size_t>> positions;  // (customer_side, index)
    std::map<std::vector<uint32_t>, std::vector<double>> cell_counts;
    std::vector<double> global_counts;
    double alpha = 1.0;

    std::vector<uint32_t> cell_key(const EncodedExample& ex) const {
        std::vector<uint32_t> key;
        key.reserve(positions.size());
        for (const auto& [customer_side, pos] : positions) {
            key.push_back(customer_side ? ex.customer_cat[pos] : ex.article_cat[pos]);
        }
        return key;
    }

    OutputDistribution predict(const EncodedExample& example) const {
        const auto it = cell_counts.find(cell_key(example));
        const std::vector<double>& counts = it == cell_counts.end() ? global_counts : it->second;
        double total = 0.0;
        for (double c : counts) total += c;
        OutputDistribution out;
        out.probs.resize(counts.size());
        const double k = static_cast<double>(counts.size());
        for (size_t i = 0; i < counts.size(); ++i) {
            out.probs[i] = (counts[i] + alpha) / (total + alpha * k);
        }
        return out;
    }
};

inline MarginalModel marginal_fit(const std::vector<EncodedExample>& train,
                                  const FeatureSchema& schema,
                                  const std::vector<std::string>& condition_fields) {
    MarginalModel model;
    model.outcome_labels = schema.outcome_labels;
    model.condition_fields = condition_fields;
    for (const auto& name : condition_fields) {
        bool found = false;
        for (size_t i = 0; i < schema.customer_categorical.size(); ++i) {
            if (schema.customer_categorical[i].name == name) {
                model.positions.emplace_back(true, i);
                found = true;
                break;
            }
        }
        if (!found) {
            for (size_t i = 0; i < schema.article_categorical.size(); ++i) {
                if (schema.article_categorical[i].name == name) {
                    model.positions.emplace_back(false, i);
                    found = true;
                    break;
                }
            }
        }
        check(found, "marginal_fit: condition field '" + name +
                         "' is not a categorical feature of the schema");
    }

    const size_t k = schema.n_outcomes();
    model.global_counts.assign(k, 0.0);
    for (const auto& ex : train) {
        model.global_counts[ex.outcome] += 1.0;
        auto& cell = model.cell_counts[model.cell_key(ex)];
        if (cell.empty()) cell.assign(k, 0.0);
        cell[ex.outcome] += 1.0;
    }
    return model;
}

inline nlohmann::json marginal_to_json(const MarginalModel& m) {
    nlohmann::json positions = nlohmann::json::array();
    for (const auto& [customer_side, pos] : m.positions) {
        positions.push_back({{"customer_side", customer_side}, {"position", pos}});
    }
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& [key, counts] : m.cell_counts) {
        cells.push_back({{"key", key}, {"counts", counts}});
    }
    return nlohmann::json{{"model_type", "marginal"},
                          {"alpha", m.alpha},
                          {"outcome_labels", m.outcome_labels},
                          {"condition_fields", m.condition_fields},
                          {"positions", positions},
                          {"cells", cells},
                          {"global_counts", m.global_counts}};
}

inline MarginalModel marginal_from_json(const nlohmann::json& j) {
    if (j.value("model_type", "") != "marginal") {
        throw data_error("marginal_from_json: not a marginal model document");
    }
    MarginalModel m;
    m.alpha = j.at("alpha").get<double>();
    m.outcome_labels = j.at("outcome_labels").get<std::vector<std::string>>();
    m.condition_fields = j.at("condition_fields").get<std::vector<std::string>>();
    for (const auto& p : j.at("positions")) {
        m.positions.emplace_back(p.at("customer_side").get<bool>(), p.at("position").get<size_t>());
    }
    for (const auto& c : j.at("cells")) {
        m.cell_counts[c.at("key").get<std::vector<uint32_t>>()] =
            c.at("counts").get<std::vector<double>>();
    }
    m.global_counts = j.at("global_counts").get<std::vector<double>>();
    return m;
}

}  // namespace sfnet
