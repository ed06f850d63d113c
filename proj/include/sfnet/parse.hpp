#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfnet/dialect.hpp"
#include "sfnet/errors.hpp"
#include "sfnet/record.hpp"

namespace sfnet {

namespace detail {

// days since 1970-01-01, proleptic Gregorian
inline int64_t days_from_civil(int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

// "April 20, 2016" -> days since epoch
inline std::optional<int64_t> parse_review_date(const std::string& raw) {
    static const std::map<std::string, unsigned> months = {
        {"january", 1}, {"february", 2}, {"march", 3},     {"april", 4},
        {"may", 5},     {"june", 6},     {"july", 7},      {"august", 8},
        {"september", 9}, {"october", 10}, {"november", 11}, {"december", 12}};
    std::string s = lower_copy(trim_copy(raw));
    for (char& c : s) {
        if (c == ',') c = ' ';
    }
    std::istringstream in(s);
    std::string month_name;
    long day = 0;
    long year = 0;
    if (!(in >> month_name >> day >> year)) return std::nullopt;
    const auto it = months.find(month_name);
    if (it == months.end() || day < 1 || day > 31 || year < 1900 || year > 2200) {
        return std::nullopt;
    }
    return days_from_civil(year, it->second, static_cast<unsigned>(day));
}

inline std::optional<std::string> json_value_to_string(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number() || v.is_boolean()) return v.dump();
    return std::nullopt;  // null / nested values are treated as absent
}

}  // namespace detail

struct ParseResult {
    std::vector<InteractionRecord> records;
    std::vector<int64_t> skipped_lines;  // 1-based line numbers of rejects
    int64_t total_lines = 0;             // non-blank lines seen
};

// Reads one JSON object per line and maps it through the dialect. Lines that
// are not valid JSON or lack a usable (customer, article, outcome) triple are
// counted as skips; more than 1% skips fails the whole ingestion.
inline ParseResult parse_jsonl(const std::string& path, const DatasetDialect& dialect) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open dataset file: " + path);

    ParseResult result;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_copy(line).empty()) continue;
        ++result.total_lines;

        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            result.skipped_lines.push_back(line_no);
            continue;
        }

        InteractionRecord rec;
        rec.source_line = line_no;
        for (const auto& [key, value] : obj.items()) {
            auto s = detail::json_value_to_string(value);
            if (s && !trim_copy(*s).empty()) rec.raw_fields[key] = *s;
        }

        auto field = [&](const std::string& name) -> std::string {
            const auto it = rec.raw_fields.find(name);
            return it == rec.raw_fields.end() ? std::string() : it->second;
        };
        rec.customer_id = field(dialect.customer_id_field);
        rec.article_id = field(dialect.article_id_field);
        std::string outcome = trim_copy(field(dialect.outcome_field));
        const auto alias = dialect.outcome_aliases.find(lower_copy(outcome));
        if (alias != dialect.outcome_aliases.end()) outcome = alias->second;
        rec.outcome_label = outcome;

        if (rec.customer_id.empty() || rec.article_id.empty() || rec.outcome_label.empty()) {
            result.skipped_lines.push_back(line_no);
            continue;
        }

        if (!dialect.timestamp_field.empty()) {
            const auto it = rec.raw_fields.find(dialect.timestamp_field);
            if (it != rec.raw_fields.end()) {
                rec.timestamp = detail::parse_review_date(it->second);
            }
        } else {
            rec.timestamp = line_no;  // file order stands in for time
        }

        result.records.push_back(normalize_compound_fields(std::move(rec), dialect));
    }

    if (result.total_lines > 0 &&
        static_cast<double>(result.skipped_lines.size()) >
            0.01 * static_cast<double>(result.total_lines)) {
        std::string lines;
        const size_t show = std::min<size_t>(result.skipped_lines.size(), 20);
        for (size_t i = 0; i < show; ++i) {
            if (i) lines += ", ";
            lines += std::to_string(result.skipped_lines[i]);
        }
        if (result.skipped_lines.size() > show) lines += ", ...";
        throw data_error("ingestion failed: " + std::to_string(result.skipped_lines.size()) +
                         " of " + std::to_string(result.total_lines) +
                         " lines malformed (lines " + lines + ")");
    }
    return result;
}

struct DatasetStats {
    int64_t transactions = 0;
    int64_t customers = 0;
    int64_t articles = 0;
    std::map<std::string, double> outcome_percent;
    int64_t single_transaction_customers = 0;
    int64_t single_transaction_articles = 0;
};

inline DatasetStats compute_dataset_stats(const std::vector<InteractionRecord>& records) {
    DatasetStats stats;
    stats.transactions = static_cast<int64_t>(records.size());
    std::map<std::string, int64_t> customer_counts;
    std::map<std::string, int64_t> article_counts;
    std::map<std::string, int64_t> outcome_counts;
    for (const auto& r : records) {
        ++customer_counts[r.customer_id];
        ++article_counts[r.article_id];
        ++outcome_counts[r.outcome_label];
    }
    stats.customers = static_cast<int64_t>(customer_counts.size());
    stats.articles = static_cast<int64_t>(article_counts.size());
    for (const auto& [customer, n] : customer_counts) {
        if (n == 1) ++stats.single_transaction_customers;
    }
    for (const auto& [article, n] : article_counts) {
        if (n == 1) ++stats.single_transaction_articles;
    }
    for (const auto& [label, n] : outcome_counts) {
        stats.outcome_percent[label] =
            100.0 * static_cast<double>(n) / static_cast<double>(stats.transactions);
    }
    return stats;
}

inline nlohmann::json stats_to_json(const DatasetStats& s) {
    return nlohmann::json{{"transactions", s.transactions},
                          {"customers", s.customers},
                          {"articles", s.articles},
                          {"outcome_percent", s.outcome_percent},
                          {"single_transaction_customers", s.single_transaction_customers},
                          {"single_transaction_articles", s.single_transaction_articles}};
}

}  // namespace sfnet
