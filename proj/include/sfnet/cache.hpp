#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sfnet/errors.hpp"
#include "sfnet/schema.hpp"

namespace sfnet {

// Flat binary cache of encoded examples.
//
//   magic  "SFNETDS1"  (8 bytes)
//   u32    n_examples, n_customer_cat, n_customer_cont,
//          n_article_cat, n_article_cont, n_outcomes     (little-endian)
//   body   per example: customer indices (u32 each), article indices,
//          customer cont values + presence flags (f64 each),
//          article cont values + presence flags, outcome (u32)

inline constexpr char kCacheMagic[8] = {'S', 'F', 'N', 'E', 'T', 'D', 'S', '1'};

namespace detail {

inline void write_u32(std::ostream& out, uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 24)};
    out.write(b, 4);
}

inline void write_f64(std::ostream& out, double v) {
    const auto bits = std::bit_cast<uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(bits >> (8 * i));
    out.write(b, 8);
}

inline uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw data_error("dataset cache truncated");
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

inline double read_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw data_error("dataset cache truncated");
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace detail

struct CacheHeader {
    uint32_t n_examples = 0;
    uint32_t n_customer_cat = 0;
    uint32_t n_customer_cont = 0;
    uint32_t n_article_cat = 0;
    uint32_t n_article_cont = 0;
    uint32_t n_outcomes = 0;
};

inline void write_cache(const std::string& path, const std::vector<EncodedExample>& examples,
                        const FeatureSchema& schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write dataset cache: " + path);

    out.write(kCacheMagic, 8);
    detail::write_u32(out, static_cast<uint32_t>(examples.size()));
    detail::write_u32(out, static_cast<uint32_t>(schema.customer_categorical.size()));
    detail::write_u32(out, static_cast<uint32_t>(schema.customer_continuous.size()));
    detail::write_u32(out, static_cast<uint32_t>(schema.article_categorical.size()));
    detail::write_u32(out, static_cast<uint32_t>(schema.article_continuous.size()));
    detail::write_u32(out, static_cast<uint32_t>(schema.n_outcomes()));

    for (const auto& ex : examples) {
        for (uint32_t v : ex.customer_cat) detail::write_u32(out, v);
        for (uint32_t v : ex.article_cat) detail::write_u32(out, v);
        for (double v : ex.customer_cont) detail::write_f64(out, v);
        for (double v : ex.customer_cont_present) detail::write_f64(out, v);
        for (double v : ex.article_cont) detail::write_f64(out, v);
        for (double v : ex.article_cont_present) detail::write_f64(out, v);
        detail::write_u32(out, ex.outcome);
    }
    if (!out) throw io_error("failed while writing dataset cache: " + path);
}

struct CacheReadResult {
    CacheHeader header;
    std::vector<EncodedExample> examples;
};

inline CacheReadResult read_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open dataset cache: " + path);

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCacheMagic, 8) != 0) {
        throw data_error("not a dataset cache (bad magic): " + path);
    }

    CacheReadResult result;
    auto& h = result.header;
    h.n_examples = detail::read_u32(in);
    h.n_customer_cat = detail::read_u32(in);
    h.n_customer_cont = detail::read_u32(in);
    h.n_article_cat = detail::read_u32(in);
    h.n_article_cont = detail::read_u32(in);
    h.n_outcomes = detail::read_u32(in);

    result.examples.resize(h.n_examples);
    for (auto& ex : result.examples) {
        ex.customer_cat.resize(h.n_customer_cat);
        for (auto& v : ex.customer_cat) v = detail::read_u32(in);
        ex.article_cat.resize(h.n_article_cat);
        for (auto& v : ex.article_cat) v = detail::read_u32(in);
        ex.customer_cont.resize(h.n_customer_cont);
        for (auto& v : ex.customer_cont) v = detail::read_f64(in);
        ex.customer_cont_present.resize(h.n_customer_cont);
        for (auto& v : ex.customer_cont_present) v = detail::read_f64(in);
        ex.article_cont.resize(h.n_article_cont);
        for (auto& v : ex.article_cont) v = detail::read_f64(in);
        ex.article_cont_present.resize(h.n_article_cont);
        for (auto& v : ex.article_cont_present) v = detail::read_f64(in);
        ex.outcome = detail::read_u32(in);
    }
    return result;
}

// Header counts must agree with the schema the caller is about to use.
inline void validate_cache_matches_schema(const CacheHeader& h, const FeatureSchema& schema,
                                          const std::string& path) {
    const bool ok = h.n_customer_cat == schema.customer_categorical.size() &&
                    h.n_customer_cont == schema.customer_continuous.size() &&
                    h.n_article_cat == schema.article_categorical.size() &&
                    h.n_article_cont == schema.article_continuous.size() &&
                    h.n_outcomes == schema.n_outcomes();
    if (!ok) throw data_error("dataset cache does not match schema: " + path);
}

}  // namespace sfnet
