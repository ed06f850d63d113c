#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "sfnet/dialect.hpp"
#include "sfnet/errors.hpp"
#include "sfnet/record.hpp"

namespace sfnet {

// Reserved vocabulary slots. DEFAULT is the trained cold-start fallback for
// values unseen during training; MISSING marks fields absent from a record.
inline constexpr uint32_t kDefaultIndex = 0;
inline constexpr uint32_t kMissingIndex = 1;
inline constexpr const char* kDefaultToken = "__default__";
inline constexpr const char* kMissingToken = "__missing__";

struct VocabField {
    std::string name;
    std::vector<std::string> values;  // values[0]=DEFAULT, values[1]=MISSING
    std::unordered_map<std::string, uint32_t> index;

    void rebuild_index() {
        index.clear();
        for (uint32_t i = 0; i < values.size(); ++i) index.emplace(values[i], i);
    }

    uint32_t encode(const std::map<std::string, std::string>& raw) const {
        const auto it = raw.find(name);
        if (it == raw.end()) return kMissingIndex;
        const auto hit = index.find(it->second);
        return hit == index.end() ? kDefaultIndex : hit->second;
    }
};

struct ContinuousField {
    std::string name;
    double mean = 0.0;
    double std = 1.0;
};

// Model-ready view of one interaction. Index lists align positionally with
// the schema's field lists; missing continuous values are 0 with a 0 flag.
struct EncodedExample {
    std::vector<uint32_t> customer_cat;
    std::vector<uint32_t> article_cat;
    std::vector<double> customer_cont;
    std::vector<double> customer_cont_present;
    std::vector<double> article_cont;
    std::vector<double> article_cont_present;
    uint32_t outcome = 0;

    bool operator==(const EncodedExample&) const = default;
};

// All vocabulary and standardization state, derived from the training split
// only. Rebuilding from the same split reproduces it exactly.
struct FeatureSchema {
    std::string dialect_name;
    std::vector<VocabField> customer_categorical;
    std::vector<VocabField> article_categorical;
    std::vector<ContinuousField> customer_continuous;
    std::vector<ContinuousField> article_continuous;
    std::vector<std::string> outcome_labels;
    std::vector<std::string> dropped_continuous;  // zero variance or never seen

    size_t n_outcomes() const { return outcome_labels.size(); }

    std::optional<uint32_t> outcome_index(const std::string& label) const {
        for (uint32_t i = 0; i < outcome_labels.size(); ++i) {
            if (outcome_labels[i] == label) return i;
        }
        return std::nullopt;
    }
};

namespace detail {

inline VocabField build_vocab(const std::string& name,
                              const std::vector<InteractionRecord>& records) {
    std::set<std::string> seen;
    for (const auto& r : records) {
        const auto it = r.raw_fields.find(name);
        if (it != r.raw_fields.end() && !it->second.empty()) seen.insert(it->second);
    }
    VocabField field;
    field.name = name;
    field.values.reserve(seen.size() + 2);
    field.values.push_back(kDefaultToken);
    field.values.push_back(kMissingToken);
    for (const auto& v : seen) {
        if (v != kDefaultToken && v != kMissingToken) field.values.push_back(v);
    }
    field.rebuild_index();
    return field;
}

inline std::optional<ContinuousField> build_continuous(
    const std::string& name, const std::vector<InteractionRecord>& records) {
    double sum = 0.0;
    double sq = 0.0;
    int64_t n = 0;
    for (const auto& r : records) {
        const auto it = r.raw_fields.find(name);
        if (it == r.raw_fields.end()) continue;
        const auto v = parse_double(it->second);
        if (!v) continue;
        sum += *v;
        sq += *v * *v;
        ++n;
    }
    if (n == 0) return std::nullopt;
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
    const double std_dev = std::sqrt(var);
    if (std_dev <= 0.0) return std::nullopt;
    return ContinuousField{name, mean, std_dev};
}

}  // namespace detail

// Vocabularies, means and stds come from the given (training) records only.
inline FeatureSchema build_schema(const std::vector<InteractionRecord>& train_records,
                                  const DatasetDialect& dialect,
                                  const std::set<std::string>& exclude_features = {}) {
    check(!train_records.empty(), "build_schema: empty training split");

    FeatureSchema schema;
    schema.dialect_name = dialect.name;

    auto excluded = [&](const std::string& f) { return exclude_features.count(f) > 0; };

    for (const auto& f : dialect.customer_categorical) {
        if (!excluded(f)) schema.customer_categorical.push_back(detail::build_vocab(f, train_records));
    }
    for (const auto& f : dialect.article_categorical) {
        if (!excluded(f)) schema.article_categorical.push_back(detail::build_vocab(f, train_records));
    }
    for (const auto& f : dialect.customer_continuous) {
        if (excluded(f)) continue;
        auto field = detail::build_continuous(f, train_records);
        if (field) {
            schema.customer_continuous.push_back(*field);
        } else {
            schema.dropped_continuous.push_back(f);
        }
    }
    for (const auto& f : dialect.article_continuous) {
        if (excluded(f)) continue;
        auto field = detail::build_continuous(f, train_records);
        if (field) {
            schema.article_continuous.push_back(*field);
        } else {
            schema.dropped_continuous.push_back(f);
        }
    }

    std::set<std::string> outcomes;
    for (const auto& r : train_records) outcomes.insert(r.outcome_label);
    schema.outcome_labels.assign(outcomes.begin(), outcomes.end());
    return schema;
}

// Encodes features only; the outcome slot is left at 0.
inline EncodedExample encode_features(const InteractionRecord& record,
                                      const FeatureSchema& schema) {
    EncodedExample ex;
    ex.customer_cat.reserve(schema.customer_categorical.size());
    for (const auto& f : schema.customer_categorical) ex.customer_cat.push_back(f.encode(record.raw_fields));
    ex.article_cat.reserve(schema.article_categorical.size());
    for (const auto& f : schema.article_categorical) ex.article_cat.push_back(f.encode(record.raw_fields));

    auto encode_cont = [&](const std::vector<ContinuousField>& fields, std::vector<double>& out,
                           std::vector<double>& present) {
        out.reserve(fields.size());
        present.reserve(fields.size());
        for (const auto& f : fields) {
            const auto it = record.raw_fields.find(f.name);
            std::optional<double> v;
            if (it != record.raw_fields.end()) v = parse_double(it->second);
            if (v) {
                out.push_back((*v - f.mean) / f.std);
                present.push_back(1.0);
            } else {
                out.push_back(0.0);
                present.push_back(0.0);
            }
        }
    };
    encode_cont(schema.customer_continuous, ex.customer_cont, ex.customer_cont_present);
    encode_cont(schema.article_continuous, ex.article_cont, ex.article_cont_present);
    return ex;
}

inline EncodedExample encode(const InteractionRecord& record, const FeatureSchema& schema) {
    const auto outcome = schema.outcome_index(record.outcome_label);
    if (!outcome) {
        throw data_error("encode: outcome label '" + record.outcome_label +
                         "' not in training outcome vocabulary (line " +
                         std::to_string(record.source_line) + ")");
    }
    EncodedExample ex = encode_features(record, schema);
    ex.outcome = *outcome;
    return ex;
}

inline std::vector<EncodedExample> encode_all(const std::vector<InteractionRecord>& records,
                                              const std::vector<size_t>& indices,
                                              const FeatureSchema& schema) {
    std::vector<EncodedExample> out;
    out.reserve(indices.size());
    for (size_t i : indices) out.push_back(encode(records[i], schema));
    return out;
}

// --- serialization ---------------------------------------------------------

inline nlohmann::json schema_to_json(const FeatureSchema& s) {
    auto vocab_json = [](const std::vector<VocabField>& fields) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& f : fields) arr.push_back({{"name", f.name}, {"values", f.values}});
        return arr;
    };
    auto cont_json = [](const std::vector<ContinuousField>& fields) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& f : fields) {
            arr.push_back({{"name", f.name}, {"mean", f.mean}, {"std", f.std}});
        }
        return arr;
    };
    return nlohmann::json{{"format", "sfnet-schema"},
                          {"version", 1},
                          {"dialect", s.dialect_name},
                          {"customer_categorical", vocab_json(s.customer_categorical)},
                          {"article_categorical", vocab_json(s.article_categorical)},
                          {"customer_continuous", cont_json(s.customer_continuous)},
                          {"article_continuous", cont_json(s.article_continuous)},
                          {"outcome_labels", s.outcome_labels},
                          {"dropped_continuous", s.dropped_continuous}};
}

inline FeatureSchema schema_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", "") != "sfnet-schema") {
        throw data_error("schema_from_json: not a schema document");
    }
    if (j.value("version", 0) != 1) {
        throw data_error("schema_from_json: unsupported version " +
                         std::to_string(j.value("version", 0)));
    }
    FeatureSchema s;
    s.dialect_name = j.value("dialect", "");
    auto read_vocab = [&](const char* key, std::vector<VocabField>& out) {
        for (const auto& f : j.at(key)) {
            VocabField v;
            v.name = f.at("name").get<std::string>();
            v.values = f.at("values").get<std::vector<std::string>>();
            v.rebuild_index();
            out.push_back(std::move(v));
        }
    };
    auto read_cont = [&](const char* key, std::vector<ContinuousField>& out) {
        for (const auto& f : j.at(key)) {
            out.push_back(ContinuousField{f.at("name").get<std::string>(),
                                          f.at("mean").get<double>(),
                                          f.at("std").get<double>()});
        }
    };
    read_vocab("customer_categorical", s.customer_categorical);
    read_vocab("article_categorical", s.article_categorical);
    read_cont("customer_continuous", s.customer_continuous);
    read_cont("article_continuous", s.article_continuous);
    s.outcome_labels = j.at("outcome_labels").get<std::vector<std::string>>();
    s.dropped_continuous = j.value("dropped_continuous", std::vector<std::string>{});
    return s;
}

inline uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Stable digest over the canonical JSON serialization.
inline uint64_t schema_hash(const FeatureSchema& s) {
    return fnv1a64(schema_to_json(s).dump());
}

}  // namespace sfnet
