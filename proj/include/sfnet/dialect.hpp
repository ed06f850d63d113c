#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sfnet/errors.hpp"
#include "sfnet/record.hpp"

namespace sfnet {

// Field-level rewrites applied before schema building.
enum class FieldTransform {
    height_to_inches,   // "5' 6\"" or "5ft 6in" -> "66"
    strip_weight_unit,  // "137lbs" -> "137"
    split_bust_size,    // "34d" -> "<field> num"="34", "<field> cat"="d"
    cup_letter_ordinal, // "dd/e" -> "5"
};

// Maps a dataset's raw JSON keys onto the model's feature roles.
struct DatasetDialect {
    std::string name;
    std::string customer_id_field;
    std::string article_id_field;
    std::string outcome_field;
    std::string timestamp_field;  // empty: records are ordered by file position

    std::vector<std::string> customer_categorical;
    std::vector<std::string> customer_continuous;
    std::vector<std::string> article_categorical;
    std::vector<std::string> article_continuous;

    std::map<std::string, std::string> outcome_aliases;
    std::vector<std::pair<std::string, FieldTransform>> transforms;

    std::set<std::string> feature_names() const {
        std::set<std::string> out;
        out.insert(customer_categorical.begin(), customer_categorical.end());
        out.insert(customer_continuous.begin(), customer_continuous.end());
        out.insert(article_categorical.begin(), article_categorical.end());
        out.insert(article_continuous.begin(), article_continuous.end());
        return out;
    }
};

inline std::string trim_copy(const std::string& s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::string lower_copy(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Strict full-string parse of a decimal number.
inline std::optional<double> parse_double(const std::string& raw) {
    const std::string s = trim_copy(raw);
    if (s.empty()) return std::nullopt;
    const char* begin = s.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    if (end != begin + s.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    return v;
}

// Accepts 5'6", 5' 6", 5ft 6in, 5ft, and plain inches.
inline std::optional<double> parse_height_inches(const std::string& raw) {
    std::string s = lower_copy(trim_copy(raw));
    if (s.empty()) return std::nullopt;

    size_t feet_mark = s.find("ft");
    size_t mark_len = 2;
    if (feet_mark == std::string::npos) {
        feet_mark = s.find('\'');
        mark_len = 1;
    }
    if (feet_mark == std::string::npos) {
        return parse_double(s);  // already inches
    }

    auto feet = parse_double(s.substr(0, feet_mark));
    if (!feet) return std::nullopt;

    std::string rest = trim_copy(s.substr(feet_mark + mark_len));
    if (!rest.empty() && rest.back() == '"') rest.pop_back();
    if (rest.size() >= 2 && rest.substr(rest.size() - 2) == "in") rest = rest.substr(0, rest.size() - 2);
    rest = trim_copy(rest);

    double inches = 0.0;
    if (!rest.empty()) {
        auto in = parse_double(rest);
        if (!in) return std::nullopt;
        inches = *in;
    }
    return 12.0 * *feet + inches;
}

inline std::optional<double> parse_weight_pounds(const std::string& raw) {
    std::string s = lower_copy(trim_copy(raw));
    for (const char* suffix : {"lbs", "lb"}) {
        const size_t n = std::string(suffix).size();
        if (s.size() > n && s.substr(s.size() - n) == suffix) {
            s = trim_copy(s.substr(0, s.size() - n));
            break;
        }
    }
    return parse_double(s);
}

// "34d" -> (34.0, "d"). Either half may be absent.
inline std::pair<std::optional<double>, std::optional<std::string>> split_bust_size(
    const std::string& raw) {
    const std::string s = lower_copy(trim_copy(raw));
    size_t i = 0;
    while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
    std::optional<double> num;
    if (i > 0) num = parse_double(s.substr(0, i));
    std::optional<std::string> cat;
    const std::string rest = trim_copy(s.substr(i));
    if (!rest.empty()) cat = rest;
    return {num, cat};
}

// US cup progression; compound labels like "dd/e" appear verbatim in data.
inline std::optional<double> cup_letter_ordinal(const std::string& raw) {
    static const std::map<std::string, double> table = {
        {"aa", 0}, {"a", 1}, {"b", 2},      {"c", 3},  {"d", 4},      {"dd", 5}, {"dd/e", 5},
        {"e", 5},  {"ddd", 6}, {"ddd/f", 6}, {"f", 6},  {"g", 7},      {"h", 8},  {"i", 9},
        {"j", 10}, {"k", 11}};
    const auto it = table.find(lower_copy(trim_copy(raw)));
    if (it == table.end()) return std::nullopt;
    return it->second;
}

namespace detail {

inline std::string format_number(double v) {
    // shortest representation that round-trips; keeps raw_fields readable
    char buf[32];
    snprintf(buf, sizeof(buf), "%.17g", v);
    double parsed = std::strtod(buf, nullptr);
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[32];
        snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
        if (std::strtod(shorter, nullptr) == parsed) return shorter;
    }
    return buf;
}

}  // namespace detail

// Rewrites compound raw fields into model-ready parts. Values that fail to
// parse are erased, which downstream encoding treats as missing.
inline InteractionRecord normalize_compound_fields(InteractionRecord record,
                                                   const DatasetDialect& dialect) {
    for (const auto& [field, transform] : dialect.transforms) {
        auto it = record.raw_fields.find(field);
        if (it == record.raw_fields.end()) continue;
        const std::string value = it->second;
        switch (transform) {
            case FieldTransform::height_to_inches: {
                auto v = parse_height_inches(value);
                if (v) {
                    it->second = detail::format_number(*v);
                } else {
                    record.raw_fields.erase(it);
                }
                break;
            }
            case FieldTransform::strip_weight_unit: {
                auto v = parse_weight_pounds(value);
                if (v) {
                    it->second = detail::format_number(*v);
                } else {
                    record.raw_fields.erase(it);
                }
                break;
            }
            case FieldTransform::split_bust_size: {
                auto [num, cat] = split_bust_size(value);
                if (num) record.raw_fields[field + " num"] = detail::format_number(*num);
                if (cat) record.raw_fields[field + " cat"] = *cat;
                record.raw_fields.erase(field);
                break;
            }
            case FieldTransform::cup_letter_ordinal: {
                auto v = cup_letter_ordinal(value);
                if (v) {
                    it->second = detail::format_number(*v);
                } else {
                    record.raw_fields.erase(it);
                }
                break;
            }
        }
    }
    return record;
}

inline DatasetDialect modcloth_dialect() {
    DatasetDialect d;
    d.name = "modcloth";
    d.customer_id_field = "user_id";
    d.article_id_field = "item_id";
    d.outcome_field = "fit";
    d.article_categorical = {"category", "item_id"};
    d.article_continuous = {"quality", "size"};
    d.customer_categorical = {"shoe width", "user_id"};
    d.customer_continuous = {"shoe size", "waist",  "bust",  "cup size",
                             "bra size",  "hips",   "height"};
    d.outcome_aliases = {{"small", "Small"}, {"fit", "Fit"}, {"large", "Large"}};
    d.transforms = {{"height", FieldTransform::height_to_inches},
                    {"cup size", FieldTransform::cup_letter_ordinal}};
    return d;
}

inline DatasetDialect renttherunway_dialect() {
    DatasetDialect d;
    d.name = "renttherunway";
    d.customer_id_field = "user_id";
    d.article_id_field = "item_id";
    d.outcome_field = "fit";
    d.timestamp_field = "review_date";
    d.article_categorical = {"category", "rented for", "item_id"};
    d.article_continuous = {"rating", "size"};
    d.customer_categorical = {"body type", "bust size cat", "user_id"};
    d.customer_continuous = {"age", "bust size num", "height", "weight"};
    d.outcome_aliases = {{"small", "Small"}, {"fit", "Fit"}, {"large", "Large"}};
    d.transforms = {{"bust size", FieldTransform::split_bust_size},
                    {"height", FieldTransform::height_to_inches},
                    {"weight", FieldTransform::strip_weight_unit}};
    return d;
}

inline DatasetDialect dialect_by_name(const std::string& name) {
    if (name == "modcloth") return modcloth_dialect();
    if (name == "renttherunway") return renttherunway_dialect();
    throw config_error("unknown dataset dialect: " + name +
                       " (expected modcloth or renttherunway)");
}

}  // namespace sfnet
