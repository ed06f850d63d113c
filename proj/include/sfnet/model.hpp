#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfnet/distribution.hpp"
#include "sfnet/errors.hpp"
#include "sfnet/matrix.hpp"
#include "sfnet/rng.hpp"
#include "sfnet/schema.hpp"
#include "sfnet/tape.hpp"

namespace sfnet {

enum class Architecture { sfnet, mlp };

inline std::string architecture_name(Architecture a) {
    return a == Architecture::sfnet ? "sfnet" : "mlp";
}

inline Architecture architecture_by_name(const std::string& name) {
    if (name == "sfnet") return Architecture::sfnet;
    if (name == "mlp") return Architecture::mlp;
    throw config_error("unknown architecture: " + name);
}

struct ModelWidths {
    std::vector<size_t> pathway = {25, 15, 10};
    std::vector<size_t> top = {50, 100, 200, 500};
    size_t embedding_dim = 10;
};

// One trainable vector per unique value of a categorical field. Row 0 is the
// DEFAULT (cold-start) embedding, row 1 the MISSING embedding.
struct EmbeddingTable {
    std::string field;
    Param rows;  // vocab_size x dim
    double l2_coefficient = 0.0;
};

// Fully connected layer with tanh activation and an additive shortcut. The
// shortcut is the identity when input and output widths match, otherwise a
// learned linear projection.
struct DenseLayer {
    Param weight;  // in x out
    Param bias;    // 1 x out
    std::optional<Param> skip_projection;
};

struct Pathway {
    std::vector<DenseLayer> layers;
};

// Full parameter set: embedding tables plus pathway and top-layer weights.
// For the mlp architecture the customer pathway doubles as the single input
// pathway over the concatenated customer and article features, and the
// article pathway is empty.
struct SFNetParams {
    Architecture architecture = Architecture::sfnet;
    ModelWidths widths;
    uint64_t schema_hash = 0;
    size_t n_outcomes = 0;

    std::vector<EmbeddingTable> customer_embeddings;
    std::vector<EmbeddingTable> article_embeddings;
    Pathway customer_pathway;
    Pathway article_pathway;
    Pathway top_pathway;
    DenseLayer output;

    std::vector<Param*> parameters() {
        std::vector<Param*> out;
        for (auto& e : customer_embeddings) out.push_back(&e.rows);
        for (auto& e : article_embeddings) out.push_back(&e.rows);
        auto add_pathway = [&](Pathway& p) {
            for (auto& layer : p.layers) {
                out.push_back(&layer.weight);
                out.push_back(&layer.bias);
                if (layer.skip_projection) out.push_back(&*layer.skip_projection);
            }
        };
        add_pathway(customer_pathway);
        add_pathway(article_pathway);
        add_pathway(top_pathway);
        out.push_back(&output.weight);
        out.push_back(&output.bias);
        return out;
    }

    std::vector<const Param*> parameters() const {
        auto mutable_list = const_cast<SFNetParams*>(this)->parameters();
        return {mutable_list.begin(), mutable_list.end()};
    }

    size_t parameter_count() const {
        size_t total = 0;
        for (const Param* p : parameters()) total += p->value.size();
        return total;
    }

    void zero_grad() {
        for (Param* p : parameters()) p->zero_grad();
    }
};

namespace detail {

inline DenseLayer make_layer(const std::string& name, size_t in, size_t out) {
    DenseLayer layer;
    layer.weight = Param(name + "/weight", Matrix(in, out));
    layer.bias = Param(name + "/bias", Matrix(1, out));
    if (in != out) layer.skip_projection = Param(name + "/skip", Matrix(in, out));
    return layer;
}

inline Pathway make_pathway(const std::string& name, size_t input_width,
                            const std::vector<size_t>& widths) {
    Pathway p;
    size_t in = input_width;
    for (size_t i = 0; i < widths.size(); ++i) {
        p.layers.push_back(make_layer(name + "/layer" + std::to_string(i), in, widths[i]));
        in = widths[i];
    }
    return p;
}

}  // namespace detail

// Builds and initializes the parameter set for a schema. Weights draw from
// the symmetric Glorot uniform range, biases start at zero and embeddings
// uniform in +-0.05. The draw order is the parameter registry order, so a
// seed fully determines the initialization.
inline SFNetParams init_params(const FeatureSchema& schema, Architecture arch,
                               const ModelWidths& widths, double l2_customer_emb,
                               double l2_article_emb, uint64_t seed) {
    check(schema.n_outcomes() >= 2, "init_params: need at least 2 outcome classes");

    SFNetParams params;
    params.architecture = arch;
    params.widths = widths;
    params.schema_hash = schema_hash(schema);
    params.n_outcomes = schema.n_outcomes();

    const size_t dim = widths.embedding_dim;
    for (const auto& f : schema.customer_categorical) {
        params.customer_embeddings.push_back(EmbeddingTable{
            f.name, Param("customer_embedding/" + f.name, Matrix(f.values.size(), dim)),
            l2_customer_emb});
    }
    for (const auto& f : schema.article_categorical) {
        params.article_embeddings.push_back(EmbeddingTable{
            f.name, Param("article_embedding/" + f.name, Matrix(f.values.size(), dim)),
            l2_article_emb});
    }

    const size_t customer_width =
        schema.customer_categorical.size() * dim + 2 * schema.customer_continuous.size();
    const size_t article_width =
        schema.article_categorical.size() * dim + 2 * schema.article_continuous.size();
    check(widths.pathway.size() >= 1 && widths.top.size() >= 1,
          "init_params: empty width configuration");

    if (arch == Architecture::sfnet) {
        check(customer_width > 0, "init_params: customer pathway has no input features");
        check(article_width > 0, "init_params: article pathway has no input features");
        params.customer_pathway =
            detail::make_pathway("customer_pathway", customer_width, widths.pathway);
        params.article_pathway =
            detail::make_pathway("article_pathway", article_width, widths.pathway);
        params.top_pathway =
            detail::make_pathway("top_pathway", 2 * widths.pathway.back(), widths.top);
    } else {
        check(customer_width + article_width > 0, "init_params: no input features");
        params.customer_pathway =
            detail::make_pathway("input_pathway", customer_width + article_width, widths.pathway);
        params.top_pathway =
            detail::make_pathway("top_pathway", widths.pathway.back(), widths.top);
    }
    params.output = detail::make_layer("output", widths.top.back(), schema.n_outcomes());
    params.output.skip_projection.reset();  // affine head straight into softmax

    Rng rng(mix_seed(seed, 0x1a17));
    for (Param* p : params.parameters()) {
        const bool is_embedding = p->name.find("embedding/") != std::string::npos;
        const bool is_bias = p->name.ends_with("/bias");
        if (is_bias) continue;  // zero
        if (is_embedding) {
            for (size_t i = 0; i < p->value.size(); ++i) {
                p->value.data()[i] = rng.uniform(-0.05, 0.05);
            }
        } else {
            const double limit =
                std::sqrt(6.0 / static_cast<double>(p->value.rows() + p->value.cols()));
            for (size_t i = 0; i < p->value.size(); ++i) {
                p->value.data()[i] = rng.uniform(-limit, limit);
            }
        }
    }
    return params;
}

// Column-blocked batch view of encoded examples: one index vector per
// embedded field plus a dense [values ++ presence flags] block per entity.
struct BatchInput {
    size_t size = 0;
    std::vector<std::vector<uint32_t>> customer_indices;
    std::vector<std::vector<uint32_t>> article_indices;
    Matrix customer_cont;
    Matrix article_cont;
    std::vector<uint32_t> targets;
};

inline BatchInput make_batch(std::span<const EncodedExample> examples, bool with_targets = true) {
    check(!examples.empty(), "make_batch: empty batch");
    const auto& first = examples.front();
    BatchInput batch;
    batch.size = examples.size();
    batch.customer_indices.resize(first.customer_cat.size());
    batch.article_indices.resize(first.article_cat.size());
    for (auto& v : batch.customer_indices) v.reserve(examples.size());
    for (auto& v : batch.article_indices) v.reserve(examples.size());
    batch.customer_cont = Matrix(examples.size(), 2 * first.customer_cont.size());
    batch.article_cont = Matrix(examples.size(), 2 * first.article_cont.size());
    if (with_targets) batch.targets.reserve(examples.size());

    for (size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        for (size_t f = 0; f < ex.customer_cat.size(); ++f) {
            batch.customer_indices[f].push_back(ex.customer_cat[f]);
        }
        for (size_t f = 0; f < ex.article_cat.size(); ++f) {
            batch.article_indices[f].push_back(ex.article_cat[f]);
        }
        auto fill = [&](Matrix& dst, const std::vector<double>& values,
                        const std::vector<double>& present) {
            auto row = dst.row(i);
            std::copy(values.begin(), values.end(), row.begin());
            std::copy(present.begin(), present.end(), row.begin() + values.size());
        };
        fill(batch.customer_cont, ex.customer_cont, ex.customer_cont_present);
        fill(batch.article_cont, ex.article_cont, ex.article_cont_present);
        if (with_targets) batch.targets.push_back(ex.outcome);
    }
    return batch;
}

namespace detail {

inline NodeId pathway_forward(Tape& t, Pathway& pathway, NodeId x) {
    for (auto& layer : pathway.layers) {
        NodeId pre = t.add_row_broadcast(t.matmul(x, t.parameter(layer.weight)),
                                         t.parameter(layer.bias));
        NodeId activated = t.tanh(pre);
        NodeId shortcut =
            layer.skip_projection ? t.matmul(x, t.parameter(*layer.skip_projection)) : x;
        x = t.add(activated, shortcut);
    }
    return x;
}

inline NodeId entity_input(Tape& t, std::vector<EmbeddingTable>& tables,
                           const std::vector<std::vector<uint32_t>>& indices,
                           const Matrix& continuous) {
    std::vector<NodeId> parts;
    for (size_t i = 0; i < tables.size(); ++i) {
        parts.push_back(t.gather_rows(tables[i].rows, indices[i]));
    }
    if (continuous.cols() > 0) parts.push_back(t.constant(continuous));
    check(!parts.empty(), "entity_input: no features");
    return t.concat_cols(parts);
}

}  // namespace detail

// Differentiable forward pass to the pre-softmax logits, one row per example.
inline NodeId forward_logits(Tape& t, SFNetParams& params, const BatchInput& batch) {
    check(batch.customer_indices.size() == params.customer_embeddings.size() &&
              batch.article_indices.size() == params.article_embeddings.size(),
          "forward_logits: batch does not match the model's schema");

    NodeId latent;
    if (params.architecture == Architecture::sfnet) {
        NodeId customer = detail::pathway_forward(
            t, params.customer_pathway,
            detail::entity_input(t, params.customer_embeddings, batch.customer_indices,
                                 batch.customer_cont));
        NodeId article = detail::pathway_forward(
            t, params.article_pathway,
            detail::entity_input(t, params.article_embeddings, batch.article_indices,
                                 batch.article_cont));
        const NodeId both[] = {customer, article};
        latent = t.concat_cols(both);
    } else {
        NodeId customer = detail::entity_input(t, params.customer_embeddings,
                                               batch.customer_indices, batch.customer_cont);
        NodeId article = detail::entity_input(t, params.article_embeddings,
                                              batch.article_indices, batch.article_cont);
        const NodeId both[] = {customer, article};
        latent = detail::pathway_forward(t, params.customer_pathway, t.concat_cols(both));
    }
    NodeId top = detail::pathway_forward(t, params.top_pathway, latent);
    return t.add_row_broadcast(t.matmul(top, t.parameter(params.output.weight)),
                               t.parameter(params.output.bias));
}

inline NodeId forward_probs(Tape& t, SFNetParams& params, const BatchInput& batch) {
    return t.softmax_rows(forward_logits(t, params, batch));
}

// Inference over an example list, chunked to bound tape memory.
inline Matrix predict_probs(SFNetParams& params, std::span<const EncodedExample> examples,
                            size_t chunk = 4096) {
    Matrix out(examples.size(), params.n_outcomes);
    for (size_t start = 0; start < examples.size(); start += chunk) {
        const size_t n = std::min(chunk, examples.size() - start);
        Tape t;
        BatchInput batch = make_batch(examples.subspan(start, n), false);
        const Matrix& probs = t.value(forward_probs(t, params, batch));
        for (size_t i = 0; i < n; ++i) {
            auto src = probs.row(i);
            std::copy(src.begin(), src.end(), out.row(start + i).begin());
        }
    }
    return out;
}

inline OutputDistribution predict_one(SFNetParams& params, const EncodedExample& example) {
    Matrix probs = predict_probs(params, std::span<const EncodedExample>(&example, 1));
    OutputDistribution d;
    d.probs.assign(probs.row(0).begin(), probs.row(0).end());
    return d;
}

}  // namespace sfnet
