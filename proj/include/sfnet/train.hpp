#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sfnet/adam.hpp"
#include "sfnet/errors.hpp"
#include "sfnet/metrics.hpp"
#include "sfnet/model.hpp"
#include "sfnet/rng.hpp"
#include "sfnet/schema.hpp"
#include "sfnet/tape.hpp"

namespace sfnet {

struct TrainConfig {
    size_t batch_size = 2048;
    size_t max_epochs = 50;  // allowed bracket is 15..50
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double l2_customer_emb = 0.1;
    double l2_article_emb = 0.01;
    double l2_weights = 0.0;  // disabled
    double default_embedding_rate = 0.1;
    size_t early_stop_patience = 5;
    uint64_t seed = 0;

    void validate() const {
        check(batch_size >= 1, "TrainConfig: batch_size must be at least 1");
        check(max_epochs >= 15 && max_epochs <= 50, "TrainConfig: max_epochs must be in [15, 50]");
        check(early_stop_patience >= 1, "TrainConfig: patience must be at least 1");
        check(default_embedding_rate >= 0.0 && default_embedding_rate <= 1.0,
              "TrainConfig: default_embedding_rate must be in [0, 1]");
        check(learning_rate > 0.0, "TrainConfig: learning_rate must be positive");
        check(l2_customer_emb >= 0.0 && l2_article_emb >= 0.0 && l2_weights >= 0.0,
              "TrainConfig: L2 coefficients must be non-negative");
    }

    AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

// Per-epoch cold-start training: independently for every embedded field,
// each example's index is replaced by DEFAULT with the given probability.
// The rng must be dedicated to the epoch so the mask is decided per
// (example, field, epoch).
inline std::vector<EncodedExample> apply_default_embedding_dropout(
    std::span<const EncodedExample> batch, double rate, Rng& rng) {
    std::vector<EncodedExample> out(batch.begin(), batch.end());
    for (auto& ex : out) {
        for (auto& idx : ex.customer_cat) {
            if (rng.bernoulli(rate)) idx = kDefaultIndex;
        }
        for (auto& idx : ex.article_cat) {
            if (rng.bernoulli(rate)) idx = kDefaultIndex;
        }
    }
    return out;
}

namespace detail {

inline std::vector<uint32_t> sorted_unique(const std::vector<uint32_t>& values) {
    std::vector<uint32_t> out = values;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Unique embedding rows touched by the batch, aligned with the parameter
// registry (embedding tables come first, dense tensors are nullopt).
inline ActiveRows active_rows_for_batch(const SFNetParams& params, const BatchInput& batch) {
    ActiveRows active(params.parameters().size());
    size_t slot = 0;
    for (size_t i = 0; i < params.customer_embeddings.size(); ++i) {
        active[slot++] = sorted_unique(batch.customer_indices[i]);
    }
    for (size_t i = 0; i < params.article_embeddings.size(); ++i) {
        active[slot++] = sorted_unique(batch.article_indices[i]);
    }
    return active;
}

}  // namespace detail

struct BatchLoss {
    double total = 0.0;
    double data_term = 0.0;
    double l2_term = 0.0;
};

// Mean cross-entropy over the batch plus L2 penalties on the embedding rows
// active in the batch (and, when enabled, on the dense weight matrices).
inline NodeId batch_loss_node(Tape& t, SFNetParams& params, const BatchInput& batch,
                              const TrainConfig& config, BatchLoss* breakdown = nullptr) {
    check(!batch.targets.empty(), "batch_loss: batch has no targets");
    NodeId probs = forward_probs(t, params, batch);
    NodeId data = t.cross_entropy_mean(probs, batch.targets);

    std::vector<NodeId> terms = {data};
    auto add_embedding_penalties = [&](std::vector<EmbeddingTable>& tables,
                                       const std::vector<std::vector<uint32_t>>& indices) {
        for (size_t i = 0; i < tables.size(); ++i) {
            if (tables[i].l2_coefficient <= 0.0) continue;
            terms.push_back(t.l2_rows(tables[i].rows, detail::sorted_unique(indices[i]),
                                      tables[i].l2_coefficient));
        }
    };
    add_embedding_penalties(params.customer_embeddings, batch.customer_indices);
    add_embedding_penalties(params.article_embeddings, batch.article_indices);

    if (config.l2_weights > 0.0) {
        auto add_pathway = [&](Pathway& p) {
            for (auto& layer : p.layers) {
                terms.push_back(t.l2_full(layer.weight, config.l2_weights));
                if (layer.skip_projection) {
                    terms.push_back(t.l2_full(*layer.skip_projection, config.l2_weights));
                }
            }
        };
        add_pathway(params.customer_pathway);
        add_pathway(params.article_pathway);
        add_pathway(params.top_pathway);
        terms.push_back(t.l2_full(params.output.weight, config.l2_weights));
    }

    NodeId total = terms.size() == 1 ? data : t.add_scalars(terms);
    if (breakdown) {
        breakdown->total = t.value(total)(0, 0);
        breakdown->data_term = t.value(data)(0, 0);
        breakdown->l2_term = breakdown->total - breakdown->data_term;
    }
    return total;
}

inline BatchLoss batch_loss(SFNetParams& params, std::span<const EncodedExample> examples,
                            const TrainConfig& config) {
    Tape t;
    BatchInput batch = make_batch(examples);
    BatchLoss breakdown;
    batch_loss_node(t, params, batch, config, &breakdown);
    return breakdown;
}

struct EpochLog {
    size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_auc = 0.0;
    double val_accuracy = 0.0;
    double val_avg_ll = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    SFNetParams params;  // best-validation snapshot
    std::vector<EpochLog> log;
    size_t best_epoch = 0;
    double best_val_auc = 0.0;
    size_t skipped_steps = 0;
};

// Likelihood maximization with mini-batch Adam: per epoch a seeded shuffle,
// a fresh default-embedding substitution mask, one Adam step per batch, then
// validation metrics. Keeps the best-validation parameters and stops early
// when the validation AUC has not improved for `early_stop_patience` epochs.
inline TrainResult train(const std::vector<EncodedExample>& train_set,
                         const std::vector<EncodedExample>& val_set,
                         const FeatureSchema& schema, Architecture arch,
                         const TrainConfig& config, const ModelWidths& widths = {}) {
    config.validate();
    check(!train_set.empty() && !val_set.empty(), "train: empty split");

    SFNetParams params = init_params(schema, arch, widths, config.l2_customer_emb,
                                     config.l2_article_emb, config.seed);
    std::vector<Param*> registry = params.parameters();
    AdamState adam = init_adam_state(registry);

    TrainResult result;
    result.best_val_auc = -1.0;

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::vector<uint32_t> val_targets;
    val_targets.reserve(val_set.size());
    for (const auto& ex : val_set) val_targets.push_back(ex.outcome);

    size_t epochs_since_improvement = 0;
    for (size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        Rng epoch_rng(mix_seed(config.seed, 1000 + epoch));
        epoch_rng.shuffle(order);

        double loss_sum = 0.0;
        size_t loss_count = 0;
        size_t n_batches = 0;
        size_t nan_batches = 0;

        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            ++n_batches;
            const size_t n = std::min(config.batch_size, order.size() - start);
            std::vector<EncodedExample> raw;
            raw.reserve(n);
            for (size_t i = 0; i < n; ++i) raw.push_back(train_set[order[start + i]]);
            std::vector<EncodedExample> substituted = apply_default_embedding_dropout(
                raw, config.default_embedding_rate, epoch_rng);

            params.zero_grad();
            Tape t;
            BatchInput batch = make_batch(substituted);
            BatchLoss breakdown;
            NodeId loss = batch_loss_node(t, params, batch, config, &breakdown);

            if (!std::isfinite(breakdown.total)) {
                ++nan_batches;
                ++result.skipped_steps;
                continue;
            }
            loss_sum += breakdown.total * static_cast<double>(n);
            loss_count += n;

            t.backward(loss);
            ActiveRows active = detail::active_rows_for_batch(params, batch);
            if (!adam_step(registry, adam, config.adam(), &active)) {
                ++result.skipped_steps;
            }
        }

        if (nan_batches == n_batches) {
            std::string log_text;
            for (const auto& e : result.log) {
                log_text += "\n  epoch " + std::to_string(e.epoch) +
                            " train_loss=" + std::to_string(e.train_loss) +
                            " val_auc=" + std::to_string(e.val_auc);
            }
            throw train_error("training diverged: every batch of epoch " +
                              std::to_string(epoch) + " produced a non-finite loss" + log_text);
        }

        Matrix val_probs = predict_probs(params, val_set);
        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : NAN;
        entry.val_auc = micro_auc(val_probs, val_targets);
        entry.val_accuracy = top_k_accuracy(val_probs, val_targets, 1);
        entry.val_avg_ll = avg_log_likelihood(val_probs, val_targets);
        entry.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
        result.log.push_back(entry);

        if (entry.val_auc > result.best_val_auc) {
            result.best_val_auc = entry.val_auc;
            result.best_epoch = epoch;
            result.params = params;
            epochs_since_improvement = 0;
        } else {
            ++epochs_since_improvement;
            if (epochs_since_improvement >= config.early_stop_patience) break;
        }
    }
    return result;
}

inline void write_train_log_csv(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write training log: " + path);
    out << "epoch,train_loss,val_auc,val_accuracy,val_avg_ll,wall_seconds\n";
    char line[256];
    for (const auto& e : log) {
        snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g,%.9g,%.3f\n", e.epoch, e.train_loss,
                 e.val_auc, e.val_accuracy, e.val_avg_ll, e.wall_seconds);
        out << line;
    }
}

}  // namespace sfnet
