#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sfnet/cache.hpp"
#include "sfnet/checkpoint.hpp"
#include "sfnet/dialect.hpp"
#include "sfnet/errors.hpp"
#include "sfnet/marginal.hpp"
#include "sfnet/metrics.hpp"
#include "sfnet/model.hpp"
#include "sfnet/naive_bayes.hpp"
#include "sfnet/parse.hpp"
#include "sfnet/schema.hpp"
#include "sfnet/split.hpp"
#include "sfnet/train.hpp"

namespace sfnet {

namespace fs = std::filesystem;

// A reproducible experiment: dataset, split protocol, model choice, training
// overrides and the trial seed list. Seeds drive both the split membership
// and the model initialization of each trial.
struct ExperimentConfig {
    std::string dataset_path;
    std::string dialect = "modcloth";
    std::string arch = "sfnet";  // sfnet | mlp | naive-bayes | marginal
    SplitSpec split;
    TrainConfig train;
    std::vector<uint64_t> seeds = {0};
    std::vector<std::string> exclude_features;
    std::vector<std::string> marginal_condition_fields = {"category"};
    std::string out_dir = "out";
    bool deterministic = false;
    std::string availability_path;
    size_t threads = 0;  // 0 = hardware concurrency

    void validate() const {
        if (arch != "sfnet" && arch != "mlp" && arch != "naive-bayes" && arch != "marginal") {
            throw config_error("unknown architecture: " + arch);
        }
        if (seeds.empty()) throw config_error("at least one trial seed is required");
        split.validate();
        if (arch == "sfnet" || arch == "mlp") train.validate();
        const DatasetDialect d = dialect_by_name(dialect);
        const auto known = d.feature_names();
        for (const auto& f : exclude_features) {
            if (!known.count(f)) {
                throw config_error("--exclude-feature '" + f + "' is not a feature of dialect " +
                                   dialect);
            }
        }
    }
};

inline nlohmann::json experiment_to_json(const ExperimentConfig& c) {
    return nlohmann::json{
        {"dataset", c.dataset_path},
        {"dialect", c.dialect},
        {"arch", c.arch},
        {"split",
         {{"mode", split_mode_name(c.split.mode)},
          {"train_fraction", c.split.train_fraction},
          {"validation_fraction", c.split.validation_fraction},
          {"test_fraction", c.split.test_fraction}}},
        {"train",
         {{"batch_size", c.train.batch_size},
          {"max_epochs", c.train.max_epochs},
          {"learning_rate", c.train.learning_rate},
          {"adam_beta1", c.train.adam_beta1},
          {"adam_beta2", c.train.adam_beta2},
          {"adam_eps", c.train.adam_eps},
          {"l2_customer_emb", c.train.l2_customer_emb},
          {"l2_article_emb", c.train.l2_article_emb},
          {"l2_weights", c.train.l2_weights},
          {"default_embedding_rate", c.train.default_embedding_rate},
          {"early_stop_patience", c.train.early_stop_patience}}},
        {"seeds", c.seeds},
        {"exclude_features", c.exclude_features},
        {"marginal_condition_fields", c.marginal_condition_fields},
        {"out", c.out_dir},
        {"deterministic", c.deterministic},
        {"availability_file", c.availability_path},
        {"threads", c.threads}};
}

inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.dataset_path = j.value("dataset", c.dataset_path);
    c.dialect = j.value("dialect", c.dialect);
    c.arch = j.value("arch", c.arch);
    if (j.contains("split")) {
        const auto& s = j.at("split");
        c.split.mode = split_mode_by_name(s.value("mode", "random"));
        c.split.train_fraction = s.value("train_fraction", c.split.train_fraction);
        c.split.validation_fraction = s.value("validation_fraction", c.split.validation_fraction);
        c.split.test_fraction = s.value("test_fraction", c.split.test_fraction);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        c.train.batch_size = t.value("batch_size", c.train.batch_size);
        c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
        c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
        c.train.adam_beta1 = t.value("adam_beta1", c.train.adam_beta1);
        c.train.adam_beta2 = t.value("adam_beta2", c.train.adam_beta2);
        c.train.adam_eps = t.value("adam_eps", c.train.adam_eps);
        c.train.l2_customer_emb = t.value("l2_customer_emb", c.train.l2_customer_emb);
        c.train.l2_article_emb = t.value("l2_article_emb", c.train.l2_article_emb);
        c.train.l2_weights = t.value("l2_weights", c.train.l2_weights);
        c.train.default_embedding_rate =
            t.value("default_embedding_rate", c.train.default_embedding_rate);
        c.train.early_stop_patience = t.value("early_stop_patience", c.train.early_stop_patience);
    }
    c.seeds = j.value("seeds", c.seeds);
    c.exclude_features = j.value("exclude_features", c.exclude_features);
    c.marginal_condition_fields =
        j.value("marginal_condition_fields", c.marginal_condition_fields);
    c.out_dir = j.value("out", c.out_dir);
    c.deterministic = j.value("deterministic", c.deterministic);
    c.availability_path = j.value("availability_file", c.availability_path);
    c.threads = j.value("threads", c.threads);
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw config_error("config file is not valid JSON: " + path);
    return experiment_from_json(j);
}

struct TrialPaths {
    fs::path dir;
    fs::path schema;
    fs::path train_cache;
    fs::path validation_cache;
    fs::path test_cache;
    fs::path checkpoint;
    fs::path model_json;  // naive-bayes / marginal artifact
    fs::path train_log;
    fs::path val_report;
    fs::path test_report;
};

inline TrialPaths trial_paths(const std::string& out_dir, uint64_t seed) {
    TrialPaths p;
    p.dir = fs::path(out_dir) / ("trial_" + std::to_string(seed));
    p.schema = p.dir / "schema.json";
    p.train_cache = p.dir / "train.bin";
    p.validation_cache = p.dir / "validation.bin";
    p.test_cache = p.dir / "test.bin";
    p.checkpoint = p.dir / "checkpoint.bin";
    p.model_json = p.dir / "model.json";
    p.train_log = p.dir / "train_log.csv";
    p.val_report = p.dir / "val_report.json";
    p.test_report = p.dir / "test_report.json";
    return p;
}

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    out << text;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw data_error("not valid JSON: " + path.string());
    return j;
}

inline void write_resolved_config(const ExperimentConfig& config) {
    fs::create_directories(config.out_dir);
    write_json(fs::path(config.out_dir) / "config.resolved.json", experiment_to_json(config));
}

struct TrialData {
    FeatureSchema schema;
    std::vector<EncodedExample> train;
    std::vector<EncodedExample> validation;
    std::vector<EncodedExample> test;
};

inline bool trial_data_cached(const TrialPaths& p) {
    return fs::exists(p.schema) && fs::exists(p.train_cache) &&
           fs::exists(p.validation_cache) && fs::exists(p.test_cache);
}

inline TrialData load_trial_data(const TrialPaths& p) {
    TrialData data;
    data.schema = schema_from_json(read_json(p.schema));
    auto load = [&](const fs::path& path) {
        CacheReadResult r = read_cache(path.string());
        validate_cache_matches_schema(r.header, data.schema, path.string());
        return std::move(r.examples);
    };
    data.train = load(p.train_cache);
    data.validation = load(p.validation_cache);
    data.test = load(p.test_cache);
    return data;
}

inline TrialData build_trial_data(const std::vector<InteractionRecord>& records,
                                  const ExperimentConfig& config, uint64_t seed) {
    SplitSpec spec = config.split;
    spec.seed = seed;
    SplitIndices idx = split(records, spec);
    check(!idx.train.empty(), "trial " + std::to_string(seed) + ": empty training split");

    std::vector<InteractionRecord> train_records;
    train_records.reserve(idx.train.size());
    for (size_t i : idx.train) train_records.push_back(records[i]);

    const std::set<std::string> exclude(config.exclude_features.begin(),
                                        config.exclude_features.end());
    TrialData data;
    data.schema = build_schema(train_records, dialect_by_name(config.dialect), exclude);
    data.train = encode_all(records, idx.train, data.schema);
    data.validation = encode_all(records, idx.validation, data.schema);
    data.test = encode_all(records, idx.test, data.schema);
    return data;
}

inline void persist_trial_data(const TrialData& data, const TrialPaths& p) {
    fs::create_directories(p.dir);
    write_json(p.schema, schema_to_json(data.schema));
    write_cache(p.train_cache.string(), data.train, data.schema);
    write_cache(p.validation_cache.string(), data.validation, data.schema);
    write_cache(p.test_cache.string(), data.test, data.schema);
}

// Runs fn(trial_index) over all seeds, serially when requested, otherwise on
// a small worker pool. Each trial only touches its own directory.
inline void for_each_trial(const ExperimentConfig& config,
                           const std::function<void(size_t)>& fn) {
    const size_t n = config.seeds.size();
    size_t n_threads = 1;
    if (!config.deterministic) {
        n_threads = config.threads ? config.threads
                                   : std::max<size_t>(1, std::thread::hardware_concurrency());
        n_threads = std::min(n_threads, n);
    }
    if (n_threads <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (size_t i = next++; i < n; i = next++) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace detail

// --- prepare ----------------------------------------------------------------

struct PrepareResult {
    DatasetStats stats;
    size_t n_trials = 0;
};

// Parses the dataset, writes the stats report, and materializes per-trial
// schema + encoded split caches under out/trial_<seed>/.
inline PrepareResult run_prepare(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    detail::write_resolved_config(config);

    ParseResult parsed = parse_jsonl(config.dataset_path, dialect_by_name(config.dialect));
    check(!parsed.records.empty(), "dataset is empty: " + config.dataset_path);
    if (!parsed.skipped_lines.empty()) {
        log << "warning: skipped " << parsed.skipped_lines.size() << " malformed lines\n";
    }

    PrepareResult result;
    result.stats = compute_dataset_stats(parsed.records);
    detail::write_json(fs::path(config.out_dir) / "stats.json", stats_to_json(result.stats));
    log << "dataset: " << result.stats.transactions << " transactions, "
        << result.stats.customers << " customers, " << result.stats.articles << " articles\n";
    log << "single-transaction customers: " << result.stats.single_transaction_customers
        << ", single-transaction articles: " << result.stats.single_transaction_articles << "\n";
    for (const auto& [label, pct] : result.stats.outcome_percent) {
        char line[128];
        snprintf(line, sizeof(line), "%% %s: %.1f\n", label.c_str(), pct);
        log << line;
    }

    for (uint64_t seed : config.seeds) {
        const TrialPaths paths = trial_paths(config.out_dir, seed);
        detail::TrialData data = detail::build_trial_data(parsed.records, config, seed);
        detail::persist_trial_data(data, paths);
        log << "trial " << seed << ": train/validation/test = " << data.train.size() << "/"
            << data.validation.size() << "/" << data.test.size() << "\n";
        for (const auto& dropped : data.schema.dropped_continuous) {
            log << "trial " << seed << ": warning: continuous feature '" << dropped
                << "' dropped (no observed values or zero variance)\n";
        }
        ++result.n_trials;
    }
    return result;
}

// --- train ------------------------------------------------------------------

struct TrialFailure {
    uint64_t seed = 0;
    std::string message;
    bool divergence = false;
};

struct TrainRunResult {
    size_t n_trained = 0;
    std::vector<TrialFailure> failures;
};

// Trains one model per seed. Trial failures are recorded and do not abort
// the remaining trials. When caches are missing they are built (and
// persisted) from the raw dataset.
inline TrainRunResult run_train(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    detail::write_resolved_config(config);

    bool need_raw = false;
    for (uint64_t seed : config.seeds) {
        if (!detail::trial_data_cached(trial_paths(config.out_dir, seed))) need_raw = true;
    }
    std::vector<InteractionRecord> records;
    if (need_raw) {
        records = parse_jsonl(config.dataset_path, dialect_by_name(config.dialect)).records;
        check(!records.empty(), "dataset is empty: " + config.dataset_path);
    }

    TrainRunResult result;
    std::vector<std::string> logs(config.seeds.size());
    std::vector<std::optional<TrialFailure>> failures(config.seeds.size());
    std::atomic<size_t> trained{0};

    detail::for_each_trial(config, [&](size_t i) {
        const uint64_t seed = config.seeds[i];
        const TrialPaths paths = trial_paths(config.out_dir, seed);
        std::ostringstream trial_log;
        try {
            detail::TrialData data;
            if (detail::trial_data_cached(paths)) {
                data = detail::load_trial_data(paths);
            } else {
                data = detail::build_trial_data(records, config, seed);
                detail::persist_trial_data(data, paths);
            }
            fs::create_directories(paths.dir);

            if (config.arch == "sfnet" || config.arch == "mlp") {
                TrainConfig train_config = config.train;
                train_config.seed = seed;
                TrainResult trained_model =
                    train(data.train, data.validation, data.schema,
                          architecture_by_name(config.arch), train_config);
                const nlohmann::json provenance{
                    {"seed", seed},
                    {"train_config", experiment_to_json(config).at("train")},
                    {"best_epoch", trained_model.best_epoch},
                    {"epochs_run", trained_model.log.size()}};
                save_checkpoint(trained_model.params, data.schema, paths.checkpoint.string(),
                                &provenance);
                write_train_log_csv(paths.train_log.string(), trained_model.log);

                std::vector<uint32_t> val_targets;
                for (const auto& ex : data.validation) val_targets.push_back(ex.outcome);
                Matrix val_probs = predict_probs(trained_model.params, data.validation);
                EvalReport val_report =
                    make_report(val_probs, val_targets, data.schema.outcome_labels);
                detail::write_json(paths.val_report, report_to_json(val_report));

                trial_log << "trial " << seed << ": best epoch " << trained_model.best_epoch
                          << " of " << trained_model.log.size() << ", val AUC "
                          << trained_model.best_val_auc;
                if (trained_model.skipped_steps) {
                    trial_log << " (skipped " << trained_model.skipped_steps
                              << " non-finite steps)";
                }
                trial_log << "\n";
            } else if (config.arch == "naive-bayes") {
                NBModel model = naive_bayes_fit(data.train, data.schema, 1.0);
                nlohmann::json doc = nb_to_json(model);
                doc["schema"] = schema_to_json(data.schema);
                detail::write_json(paths.model_json, doc);
                trial_log << "trial " << seed << ": naive-bayes fit on " << data.train.size()
                          << " examples\n";
            } else {
                MarginalModel model =
                    marginal_fit(data.train, data.schema, config.marginal_condition_fields);
                nlohmann::json doc = marginal_to_json(model);
                doc["schema"] = schema_to_json(data.schema);
                detail::write_json(paths.model_json, doc);
                trial_log << "trial " << seed << ": marginal fit over "
                          << model.cell_counts.size() << " cells\n";
            }
            ++trained;
        } catch (const train_error& e) {
            failures[i] = TrialFailure{seed, e.what(), true};
        } catch (const std::exception& e) {
            failures[i] = TrialFailure{seed, e.what(), false};
        }
        logs[i] = trial_log.str();
    });

    for (size_t i = 0; i < config.seeds.size(); ++i) {
        log << logs[i];
        if (failures[i]) {
            log << "trial " << failures[i]->seed << " FAILED: " << failures[i]->message << "\n";
            result.failures.push_back(*failures[i]);
        }
    }
    result.n_trained = trained;
    return result;
}

// --- evaluate ---------------------------------------------------------------

using AvailabilityMap = std::map<std::string, std::vector<std::string>>;

inline AvailabilityMap load_availability(const std::string& path) {
    const nlohmann::json j = detail::read_json(path);
    if (!j.is_object()) throw data_error("availability file must be a JSON object: " + path);
    AvailabilityMap out;
    for (const auto& [article, labels] : j.items()) {
        out[article] = labels.get<std::vector<std::string>>();
    }
    return out;
}

namespace detail {

inline std::vector<size_t> availability_classes(const AvailabilityMap& avail,
                                                const std::string& article_id,
                                                const FeatureSchema& schema) {
    const auto it = avail.find(article_id);
    if (it == avail.end()) return {};
    std::vector<size_t> classes;
    for (const auto& label : it->second) {
        const auto idx = schema.outcome_index(label);
        if (!idx) {
            throw data_error("availability file lists unknown outcome label '" + label +
                             "' for article " + article_id);
        }
        classes.push_back(*idx);
    }
    return classes;
}

}  // namespace detail

struct EvaluateRunResult {
    std::vector<std::pair<uint64_t, EvalReport>> per_trial;
    std::optional<AggregateReport> aggregate;
    uint64_t best_seed = 0;
};

// Scores every trial's model on its test split, writes per-trial reports,
// the mean +- std aggregate and the ROC points of the best trial. With an
// availability file, output distributions are truncated and renormalized to
// each article's available outcome classes before scoring.
inline EvaluateRunResult run_evaluate(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    detail::write_resolved_config(config);

    std::optional<AvailabilityMap> availability;
    if (!config.availability_path.empty()) {
        availability = load_availability(config.availability_path);
    }

    // availability needs the raw records to recover article ids per example
    std::vector<InteractionRecord> records;
    if (availability) {
        records = parse_jsonl(config.dataset_path, dialect_by_name(config.dialect)).records;
    }

    EvaluateRunResult result;
    double best_auc = -1.0;
    Matrix best_probs;
    std::vector<uint32_t> best_targets;

    for (uint64_t seed : config.seeds) {
        const TrialPaths paths = trial_paths(config.out_dir, seed);
        if (!fs::exists(paths.schema)) {
            throw io_error("trial " + std::to_string(seed) + " has no schema at " +
                           paths.schema.string() + " (run prepare/train first)");
        }
        FeatureSchema schema = schema_from_json(detail::read_json(paths.schema));

        std::vector<EncodedExample> test;
        std::vector<std::string> article_ids;
        if (availability) {
            SplitSpec spec = config.split;
            spec.seed = seed;
            SplitIndices idx = split(records, spec);
            test.reserve(idx.test.size());
            for (size_t i : idx.test) {
                test.push_back(encode(records[i], schema));
                article_ids.push_back(records[i].article_id);
            }
        } else {
            CacheReadResult cached = read_cache(paths.test_cache.string());
            validate_cache_matches_schema(cached.header, schema, paths.test_cache.string());
            test = std::move(cached.examples);
        }
        check(!test.empty(), "trial " + std::to_string(seed) + ": empty test split");

        Matrix probs;
        if (config.arch == "sfnet" || config.arch == "mlp") {
            LoadedModel loaded =
                load_checkpoint(paths.checkpoint.string(), schema_hash(schema));
            probs = predict_probs(loaded.params, test);
        } else {
            const nlohmann::json doc = detail::read_json(paths.model_json);
            probs = Matrix(test.size(), schema.n_outcomes());
            if (config.arch == "naive-bayes") {
                NBModel model = nb_from_json(doc);
                for (size_t i = 0; i < test.size(); ++i) {
                    OutputDistribution d = model.predict(test[i]);
                    std::copy(d.probs.begin(), d.probs.end(), probs.row(i).begin());
                }
            } else {
                MarginalModel model = marginal_from_json(doc);
                for (size_t i = 0; i < test.size(); ++i) {
                    OutputDistribution d = model.predict(test[i]);
                    std::copy(d.probs.begin(), d.probs.end(), probs.row(i).begin());
                }
            }
        }

        if (availability) {
            for (size_t i = 0; i < test.size(); ++i) {
                const auto classes =
                    detail::availability_classes(*availability, article_ids[i], schema);
                if (classes.empty()) continue;  // article not restricted
                OutputDistribution d;
                d.probs.assign(probs.row(i).begin(), probs.row(i).end());
                OutputDistribution truncated = truncate_renormalize(d, classes);
                std::copy(truncated.probs.begin(), truncated.probs.end(), probs.row(i).begin());
            }
        }

        std::vector<uint32_t> targets;
        targets.reserve(test.size());
        for (const auto& ex : test) targets.push_back(ex.outcome);
        EvalReport report = make_report(probs, targets, schema.outcome_labels);
        detail::write_json(paths.test_report, report_to_json(report));
        result.per_trial.emplace_back(seed, report);

        char line[160];
        snprintf(line, sizeof(line), "trial %llu: AUC %.3f accuracy %.3f avg LL %.3f\n",
                 static_cast<unsigned long long>(seed), report.micro_auc, report.accuracy,
                 report.avg_log_likelihood);
        log << line;

        if (report.micro_auc > best_auc) {
            best_auc = report.micro_auc;
            result.best_seed = seed;
            best_probs = probs;
            best_targets = targets;
        }
    }

    // ROC of the best trial
    {
        auto points = roc_points(best_probs, best_targets);
        std::ostringstream csv;
        csv << "fpr,tpr\n";
        char line[64];
        for (const auto& [fpr, tpr] : points) {
            snprintf(line, sizeof(line), "%.9g,%.9g\n", fpr, tpr);
            csv << line;
        }
        detail::write_text(fs::path(config.out_dir) / "roc.csv", csv.str());
    }

    if (result.per_trial.size() >= 2) {
        std::vector<EvalReport> reports;
        for (const auto& [seed, report] : result.per_trial) reports.push_back(report);
        AggregateReport aggregate = aggregate_trials(reports);
        nlohmann::json doc = aggregate_to_json(aggregate);
        doc["seeds"] = config.seeds;
        doc["best_seed"] = result.best_seed;
        nlohmann::json per_trial = nlohmann::json::array();
        for (const auto& [seed, report] : result.per_trial) {
            per_trial.push_back({{"seed", seed}, {"report", report_to_json(report)}});
        }
        doc["per_trial"] = per_trial;
        detail::write_json(fs::path(config.out_dir) / "aggregate.json", doc);

        log << "aggregate over " << aggregate.n_trials << " trials:\n";
        log << "  AUC " << format_mean_std(aggregate.metrics.at("micro_auc")) << "\n";
        log << "  accuracy " << format_mean_std(aggregate.metrics.at("accuracy")) << "\n";
        log << "  top-1/2/3 " << format_mean_std(aggregate.metrics.at("top_1")) << " / "
            << format_mean_std(aggregate.metrics.at("top_2")) << " / "
            << format_mean_std(aggregate.metrics.at("top_3")) << "\n";
        log << "  avg log-likelihood " << format_mean_std(aggregate.metrics.at("avg_log_likelihood"))
            << "\n";
        result.aggregate = aggregate;
    }
    return result;
}

// --- predict ----------------------------------------------------------------

struct PredictOptions {
    std::string model_path;  // checkpoint.bin or model.json
    std::string input_path;
    std::string output_path;
    std::string availability_path;
};

struct PredictResult {
    size_t n_predicted = 0;
    size_t n_failed = 0;
};

// Scores raw query records (same JSON-lines field layout as the dataset,
// outcome not required) against a stored model. Unseen customers/articles
// route through the DEFAULT embedding. Bad lines are reported and skipped.
inline PredictResult run_predict(const PredictOptions& options, std::ostream& err) {
    // the checkpoint / model document carries its schema, so queries can be
    // encoded without the original dataset
    FeatureSchema schema;
    std::optional<LoadedModel> nn;
    std::optional<NBModel> nb;
    std::optional<MarginalModel> marginal;
    {
        std::ifstream probe(options.model_path, std::ios::binary);
        if (!probe) throw io_error("cannot open model: " + options.model_path);
        char magic[8] = {};
        probe.read(magic, 8);
        probe.close();
        if (std::memcmp(magic, kCheckpointMagic, 8) == 0) {
            nn = load_checkpoint(options.model_path);
            schema = nn->schema;
        } else {
            const nlohmann::json doc = detail::read_json(options.model_path);
            if (!doc.contains("schema")) {
                throw data_error("model document lacks an embedded schema: " +
                                 options.model_path);
            }
            schema = schema_from_json(doc.at("schema"));
            if (doc.value("model_type", "") == "naive_bayes") {
                nb = nb_from_json(doc);
            } else if (doc.value("model_type", "") == "marginal") {
                marginal = marginal_from_json(doc);
            } else {
                throw data_error("unknown model document: " + options.model_path);
            }
        }
    }
    const DatasetDialect dialect = dialect_by_name(schema.dialect_name);

    std::optional<AvailabilityMap> availability;
    if (!options.availability_path.empty()) {
        availability = load_availability(options.availability_path);
    }

    std::ifstream in(options.input_path);
    if (!in) throw io_error("cannot open query file: " + options.input_path);
    std::ofstream output(options.output_path);
    if (!output) throw io_error("cannot write predictions: " + options.output_path);

    PredictResult result;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_copy(line).empty()) continue;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            err << "line " << line_no << ": not a JSON object, skipped\n";
            ++result.n_failed;
            continue;
        }
        InteractionRecord rec;
        rec.source_line = line_no;
        for (const auto& [key, value] : obj.items()) {
            auto s = detail::json_value_to_string(value);
            if (s && !trim_copy(*s).empty()) rec.raw_fields[key] = *s;
        }
        rec = normalize_compound_fields(std::move(rec), dialect);
        const auto article_it = rec.raw_fields.find(dialect.article_id_field);
        const std::string article_id =
            article_it == rec.raw_fields.end() ? std::string() : article_it->second;

        try {
            EncodedExample ex = encode_features(rec, schema);
            OutputDistribution dist;
            if (nn) {
                dist = predict_one(nn->params, ex);
            } else if (nb) {
                dist = nb->predict(ex);
            } else {
                dist = marginal->predict(ex);
            }
            if (availability) {
                const auto classes =
                    detail::availability_classes(*availability, article_id, schema);
                if (!classes.empty()) dist = truncate_renormalize(dist, classes);
            }
            nlohmann::json probs;
            size_t argmax = 0;
            for (size_t i = 0; i < dist.size(); ++i) {
                probs[schema.outcome_labels[i]] = dist.probs[i];
                if (dist.probs[i] > dist.probs[argmax]) argmax = i;
            }
            output << nlohmann::json{{"line", line_no},
                                     {"probs", probs},
                                     {"prediction", schema.outcome_labels[argmax]}}
                          .dump()
                   << "\n";
            ++result.n_predicted;
        } catch (const std::exception& e) {
            err << "line " << line_no << ": " << e.what() << ", skipped\n";
            ++result.n_failed;
        }
    }
    return result;
}

}  // namespace sfnet
