#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfnet/errors.hpp"
#include "sfnet/model.hpp"
#include "sfnet/schema.hpp"

namespace sfnet {

// Checkpoint container:
//
//   magic  "SFNETCK1"      (8 bytes)
//   u32    header length   (little-endian)
//   JSON   header: architecture, widths, outcome count, schema (embedded,
//          with its hash), embedding table manifest, tensor name/shape list
//   f32    tensor data, little-endian, in header-declared order
//
// Values are trained in 64-bit but stored down-cast to 32-bit.

inline constexpr char kCheckpointMagic[8] = {'S', 'F', 'N', 'E', 'T', 'C', 'K', '1'};

namespace detail {

inline void write_u32_le(std::ostream& out, uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 24)};
    out.write(b, 4);
}

inline uint32_t read_u32_le(std::istream& in, const std::string& what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw data_error("checkpoint truncated while reading " + what);
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

inline void write_f32_le(std::ostream& out, float v) {
    const auto bits = std::bit_cast<uint32_t>(v);
    char b[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8),
                 static_cast<char>(bits >> 16), static_cast<char>(bits >> 24)};
    out.write(b, 4);
}

inline float read_f32_le(std::istream& in, const std::string& what) {
    return std::bit_cast<float>(read_u32_le(in, what));
}

}  // namespace detail

inline nlohmann::json checkpoint_header(const SFNetParams& params, const FeatureSchema& schema,
                                        const nlohmann::json* extra = nullptr) {
    const uint64_t hash = schema_hash(schema);
    check(hash == params.schema_hash,
          "save_checkpoint: parameters were built for a different schema");

    nlohmann::json embeddings = {{"customer", nlohmann::json::array()},
                                 {"article", nlohmann::json::array()}};
    for (const auto& e : params.customer_embeddings) {
        embeddings["customer"].push_back({{"field", e.field},
                                          {"vocab_size", e.rows.value.rows()},
                                          {"l2", e.l2_coefficient}});
    }
    for (const auto& e : params.article_embeddings) {
        embeddings["article"].push_back({{"field", e.field},
                                         {"vocab_size", e.rows.value.rows()},
                                         {"l2", e.l2_coefficient}});
    }

    nlohmann::json tensors = nlohmann::json::array();
    for (const Param* p : params.parameters()) {
        tensors.push_back(
            {{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
    }

    nlohmann::json header{{"format", "sfnet-checkpoint"},
                          {"version", 1},
                          {"architecture", architecture_name(params.architecture)},
                          {"widths",
                           {{"pathway", params.widths.pathway},
                            {"top", params.widths.top},
                            {"embedding_dim", params.widths.embedding_dim}}},
                          {"n_outcomes", params.n_outcomes},
                          {"schema_hash", std::to_string(hash)},
                          {"schema", schema_to_json(schema)},
                          {"embeddings", embeddings},
                          {"tensors", tensors}};
    if (extra) header["extra"] = *extra;
    return header;
}

inline void save_checkpoint(const SFNetParams& params, const FeatureSchema& schema,
                            const std::string& path, const nlohmann::json* extra = nullptr) {
    const std::string header = checkpoint_header(params, schema, extra).dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, 8);
    detail::write_u32_le(out, static_cast<uint32_t>(header.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const Param* p : params.parameters()) {
        for (size_t i = 0; i < p->value.size(); ++i) {
            detail::write_f32_le(out, static_cast<float>(p->value.data()[i]));
        }
    }
    if (!out) throw io_error("failed while writing checkpoint: " + path);
}

// Reads only the JSON header; tensor data is never touched.
inline nlohmann::json read_checkpoint_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw data_error("not a checkpoint file (bad magic): " + path);
    }
    const uint32_t header_len = detail::read_u32_le(in, "header length");
    std::string header(header_len, '\0');
    in.read(header.data(), header_len);
    if (!in) throw data_error("checkpoint truncated while reading header: " + path);
    nlohmann::json j = nlohmann::json::parse(header, nullptr, false);
    if (j.is_discarded() || j.value("format", "") != "sfnet-checkpoint") {
        throw data_error("checkpoint header is not valid: " + path);
    }
    if (j.value("version", 0) != 1) {
        throw data_error("unsupported checkpoint version " +
                         std::to_string(j.value("version", 0)) + ": " + path);
    }
    return j;
}

struct LoadedModel {
    SFNetParams params;
    FeatureSchema schema;
};

// Rebuilds the parameter set from the header, then fills tensors from the
// 32-bit payload. Nothing escapes on error, so a truncated file cannot
// produce a partial model. When expected_schema_hash is given, a mismatch
// names both hashes.
inline LoadedModel load_checkpoint(const std::string& path,
                                   std::optional<uint64_t> expected_schema_hash = std::nullopt) {
    const nlohmann::json header = read_checkpoint_header(path);

    LoadedModel loaded;
    loaded.schema = schema_from_json(header.at("schema"));
    const uint64_t recorded_hash = std::stoull(header.at("schema_hash").get<std::string>());
    const uint64_t actual_hash = schema_hash(loaded.schema);
    if (recorded_hash != actual_hash) {
        throw data_error("checkpoint schema hash " + std::to_string(recorded_hash) +
                         " does not match its embedded schema " + std::to_string(actual_hash) +
                         ": " + path);
    }
    if (expected_schema_hash && *expected_schema_hash != recorded_hash) {
        throw data_error("checkpoint schema hash " + std::to_string(recorded_hash) +
                         " does not match the expected schema hash " +
                         std::to_string(*expected_schema_hash) + ": " + path);
    }

    SFNetParams& params = loaded.params;
    params.architecture = architecture_by_name(header.at("architecture").get<std::string>());
    params.widths.pathway = header.at("widths").at("pathway").get<std::vector<size_t>>();
    params.widths.top = header.at("widths").at("top").get<std::vector<size_t>>();
    params.widths.embedding_dim = header.at("widths").at("embedding_dim").get<size_t>();
    params.n_outcomes = header.at("n_outcomes").get<size_t>();
    params.schema_hash = recorded_hash;

    const size_t dim = params.widths.embedding_dim;
    for (const auto& e : header.at("embeddings").at("customer")) {
        params.customer_embeddings.push_back(
            EmbeddingTable{e.at("field").get<std::string>(),
                           Param("customer_embedding/" + e.at("field").get<std::string>(),
                                 Matrix(e.at("vocab_size").get<size_t>(), dim)),
                           e.at("l2").get<double>()});
    }
    for (const auto& e : header.at("embeddings").at("article")) {
        params.article_embeddings.push_back(
            EmbeddingTable{e.at("field").get<std::string>(),
                           Param("article_embedding/" + e.at("field").get<std::string>(),
                                 Matrix(e.at("vocab_size").get<size_t>(), dim)),
                           e.at("l2").get<double>()});
    }

    const size_t customer_width = params.customer_embeddings.size() * dim +
                                  2 * loaded.schema.customer_continuous.size();
    const size_t article_width = params.article_embeddings.size() * dim +
                                 2 * loaded.schema.article_continuous.size();
    if (params.architecture == Architecture::sfnet) {
        params.customer_pathway =
            detail::make_pathway("customer_pathway", customer_width, params.widths.pathway);
        params.article_pathway =
            detail::make_pathway("article_pathway", article_width, params.widths.pathway);
        params.top_pathway = detail::make_pathway(
            "top_pathway", 2 * params.widths.pathway.back(), params.widths.top);
    } else {
        params.customer_pathway = detail::make_pathway(
            "input_pathway", customer_width + article_width, params.widths.pathway);
        params.top_pathway =
            detail::make_pathway("top_pathway", params.widths.pathway.back(), params.widths.top);
    }
    params.output = detail::make_layer("output", params.widths.top.back(), params.n_outcomes);
    params.output.skip_projection.reset();

    std::vector<Param*> registry = params.parameters();
    const auto& tensors = header.at("tensors");
    if (tensors.size() != registry.size()) {
        throw data_error("checkpoint tensor list does not match the rebuilt model: " + path);
    }
    for (size_t i = 0; i < registry.size(); ++i) {
        const auto& t = tensors.at(i);
        if (t.at("name").get<std::string>() != registry[i]->name ||
            t.at("rows").get<size_t>() != registry[i]->value.rows() ||
            t.at("cols").get<size_t>() != registry[i]->value.cols()) {
            throw data_error("checkpoint tensor '" + t.at("name").get<std::string>() +
                             "' does not match the rebuilt model: " + path);
        }
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    const uint32_t header_len = detail::read_u32_le(in, "header length");
    in.seekg(8 + 4 + static_cast<std::streamoff>(header_len));

    for (Param* p : registry) {
        for (size_t i = 0; i < p->value.size(); ++i) {
            p->value.data()[i] = static_cast<double>(detail::read_f32_le(in, p->name));
        }
    }
    char extra;
    if (in.read(&extra, 1)) {
        throw data_error("checkpoint has trailing data: " + path);
    }
    return loaded;
}

}  // namespace sfnet
