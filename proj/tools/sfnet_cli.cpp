// Command-line surface for reproducible size/fit experiments: prepare the
// dataset caches, train one model per trial seed, evaluate against the test
// split, and score ad-hoc query files.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfnet/experiment.hpp"

namespace {

std::vector<uint64_t> parse_seed_list(const std::string& text) {
    std::vector<uint64_t> seeds;
    std::stringstream in(text);
    std::string token;
    while (std::getline(in, token, ',')) {
        token = sfnet::trim_copy(token);
        if (token.empty()) continue;
        try {
            seeds.push_back(std::stoull(token));
        } catch (const std::exception&) {
            throw sfnet::config_error("--seed-list: '" + token + "' is not a seed");
        }
    }
    if (seeds.empty()) throw sfnet::config_error("--seed-list: no seeds given");
    return seeds;
}

struct CommonFlags {
    std::string config_path;
    std::string dataset;
    std::string dialect;
    std::string split_mode;
    std::string seed_list;
    std::string arch;
    std::vector<std::string> exclude_features;
    std::vector<std::string> condition_fields;
    int64_t epochs = -1;
    int64_t batch_size = -1;
    std::string out_dir;
    bool deterministic = false;
    std::string availability_file;
    int64_t threads = -1;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "experiment config file (JSON)");
    cmd->add_option("--dataset", flags.dataset, "dataset JSON-lines file");
    cmd->add_option("--dialect", flags.dialect, "dataset dialect: modcloth | renttherunway");
    cmd->add_option("--split", flags.split_mode, "split mode: random | chrono");
    cmd->add_option("--seed-list", flags.seed_list, "comma-separated trial seeds, e.g. 0,1,2");
    cmd->add_option("--arch", flags.arch, "sfnet | mlp | naive-bayes | marginal");
    cmd->add_option("--exclude-feature", flags.exclude_features,
                    "feature to drop from the schema (repeatable)");
    cmd->add_option("--condition-field", flags.condition_fields,
                    "condition field for the marginal baseline (repeatable)");
    cmd->add_option("--epochs", flags.epochs, "maximum training epochs (15..50)");
    cmd->add_option("--batch-size", flags.batch_size, "SGD batch size");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_flag("--deterministic", flags.deterministic,
                  "run trials serially for byte-reproducible output");
    cmd->add_option("--availability-file", flags.availability_file,
                    "JSON map of article id to available outcome labels");
    cmd->add_option("--threads", flags.threads, "trial workers (0 = hardware)");
}

sfnet::ExperimentConfig resolve_config(const CommonFlags& flags) {
    sfnet::ExperimentConfig config;
    if (!flags.config_path.empty()) config = sfnet::load_experiment_config(flags.config_path);
    if (!flags.dataset.empty()) config.dataset_path = flags.dataset;
    if (!flags.dialect.empty()) config.dialect = flags.dialect;
    if (!flags.split_mode.empty()) config.split.mode = sfnet::split_mode_by_name(flags.split_mode);
    if (!flags.seed_list.empty()) config.seeds = parse_seed_list(flags.seed_list);
    if (!flags.arch.empty()) config.arch = flags.arch;
    if (!flags.exclude_features.empty()) config.exclude_features = flags.exclude_features;
    if (!flags.condition_fields.empty()) {
        config.marginal_condition_fields = flags.condition_fields;
    }
    if (flags.epochs >= 0) config.train.max_epochs = static_cast<size_t>(flags.epochs);
    if (flags.batch_size >= 0) config.train.batch_size = static_cast<size_t>(flags.batch_size);
    if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
    if (flags.deterministic) config.deterministic = true;
    if (!flags.availability_file.empty()) config.availability_path = flags.availability_file;
    if (flags.threads >= 0) config.threads = static_cast<size_t>(flags.threads);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"size & fit prediction experiments"};
    app.require_subcommand(1);

    CommonFlags prepare_flags;
    CLI::App* prepare = app.add_subcommand(
        "prepare", "parse the dataset, build per-trial schemas and split caches");
    add_common_flags(prepare, prepare_flags);

    CommonFlags train_flags;
    CLI::App* train_cmd =
        app.add_subcommand("train", "train one model per trial seed");
    add_common_flags(train_cmd, train_flags);

    CommonFlags eval_flags;
    CLI::App* evaluate =
        app.add_subcommand("evaluate", "score trained models on their test splits");
    add_common_flags(evaluate, eval_flags);

    std::string predict_model;
    std::string predict_input;
    std::string predict_output;
    std::string predict_availability;
    CLI::App* predict = app.add_subcommand("predict", "score a JSON-lines query file");
    predict->add_option("--checkpoint", predict_model, "checkpoint.bin or model.json")
        ->required();
    predict->add_option("--input", predict_input, "query JSON-lines file")->required();
    predict->add_option("--output", predict_output, "output JSON-lines file")->required();
    predict->add_option("--availability-file", predict_availability,
                        "JSON map of article id to available outcome labels");

    try {
        app.parse(argc, argv);

        if (prepare->parsed()) {
            sfnet::run_prepare(resolve_config(prepare_flags), std::cout);
            return 0;
        }
        if (train_cmd->parsed()) {
            sfnet::TrainRunResult result = sfnet::run_train(resolve_config(train_flags), std::cout);
            if (!result.failures.empty()) {
                bool divergence = false;
                for (const auto& f : result.failures) divergence |= f.divergence;
                return divergence ? 3 : 2;
            }
            return 0;
        }
        if (evaluate->parsed()) {
            sfnet::run_evaluate(resolve_config(eval_flags), std::cout);
            return 0;
        }
        if (predict->parsed()) {
            sfnet::PredictOptions options;
            options.model_path = predict_model;
            options.input_path = predict_input;
            options.output_path = predict_output;
            options.availability_path = predict_availability;
            sfnet::PredictResult result = sfnet::run_predict(options, std::cerr);
            std::cerr << "predicted " << result.n_predicted << " records, " << result.n_failed
                      << " failed\n";
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const sfnet::train_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const sfnet::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sfnet::data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sfnet::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const sfnet::contract_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
