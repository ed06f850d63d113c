#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace sfnet {

// One raw (customer, article, outcome) transaction. raw_fields holds the
// dataset strings verbatim; anything absent is treated as missing downstream.
struct InteractionRecord {
    std::string customer_id;
    std::string article_id;
    std::string outcome_label;
    std::map<std::string, std::string> raw_fields;
    std::optional<int64_t> timestamp;
    int64_t source_line = 0;
};

}  // namespace sfnet
