#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sfnet/checkpoint.hpp"
#include "sfnet/metrics.hpp"
#include "sfnet/split.hpp"
#include "sfnet/train.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace sfnet;
namespace fs = std::filesystem;

namespace {

ModelWidths small_widths() {
    ModelWidths w;
    w.pathway = {6, 4};
    w.top = {8, 5};
    w.embedding_dim = 3;
    return w;
}

TrainConfig quick_config(uint64_t seed = 0) {
    TrainConfig c;
    c.batch_size = 32;
    c.max_epochs = 15;
    c.early_stop_patience = 15;
    c.seed = seed;
    return c;
}

struct Prepared {
    FeatureSchema schema;
    std::vector<EncodedExample> train;
    std::vector<EncodedExample> val;
};

Prepared prepare_synthetic(size_t n, uint64_t seed, double noise = 0.0) {
    auto records = synthetic::make_records(n, seed, noise);
    SplitSpec spec;
    spec.seed = seed;
    SplitIndices idx = split(records, spec);
    Prepared p;
    p.schema = build_schema([&] {
        std::vector<InteractionRecord> train;
        for (size_t i : idx.train) train.push_back(records[i]);
        return train;
    }(), modcloth_dialect());
    for (size_t i : idx.train) p.train.push_back(encode(records[i], p.schema));
    for (size_t i : idx.validation) p.val.push_back(encode(records[i], p.schema));
    return p;
}

fs::path temp_file(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "sfnet_train_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("TrainConfig validation") {
    TrainConfig c;
    c.validate();  // defaults are valid

    TrainConfig bad = c;
    bad.max_epochs = 5;
    REQUIRE_THROWS_AS(bad.validate(), contract_error);
    bad = c;
    bad.default_embedding_rate = 1.5;
    REQUIRE_THROWS_AS(bad.validate(), contract_error);
    bad = c;
    bad.batch_size = 0;
    REQUIRE_THROWS_AS(bad.validate(), contract_error);
}

TEST_CASE("batch_loss of an untrained model with a zero output layer is ln k") {
    Prepared p = prepare_synthetic(60, 3);
    SFNetParams params = init_params(p.schema, Architecture::sfnet, small_widths(), 0.1, 0.01, 5);
    params.output.weight.value.fill(0.0);
    params.output.bias.value.fill(0.0);

    TrainConfig config = quick_config();
    BatchLoss loss = batch_loss(params, p.train, config);
    REQUIRE(loss.data_term == Catch::Approx(std::log(3.0)).epsilon(1e-12));
    REQUIRE(loss.l2_term > 0.0);  // random embeddings carry some norm
    REQUIRE(loss.total == Catch::Approx(loss.data_term + loss.l2_term));
}

TEST_CASE("batch_loss l2 term vanishes when active embedding rows are zero") {
    Prepared p = prepare_synthetic(40, 7);
    SFNetParams params = init_params(p.schema, Architecture::sfnet, small_widths(), 0.1, 0.01, 5);
    for (auto& table : params.customer_embeddings) table.rows.value.fill(0.0);
    for (auto& table : params.article_embeddings) table.rows.value.fill(0.0);

    BatchLoss loss = batch_loss(params, p.train, quick_config());
    REQUIRE(loss.l2_term == 0.0);
    REQUIRE(loss.total == loss.data_term);
}

TEST_CASE("optional dense-weight l2 penalty participates in loss and gradients") {
    Prepared p = prepare_synthetic(40, 8);
    SFNetParams params = init_params(p.schema, Architecture::sfnet, small_widths(), 0.1, 0.01, 5);
    std::vector<EncodedExample> batch(p.train.begin(), p.train.begin() + 4);

    TrainConfig off = quick_config();
    TrainConfig on = quick_config();
    on.l2_weights = 0.01;

    BatchLoss base = batch_loss(params, batch, off);
    BatchLoss penalized = batch_loss(params, batch, on);
    REQUIRE(penalized.l2_term > base.l2_term);
    REQUIRE(penalized.data_term == Catch::Approx(base.data_term));

    params.zero_grad();
    Tape t;
    BatchInput batch_input = make_batch(batch);
    NodeId loss = batch_loss_node(t, params, batch_input, on);
    t.backward(loss);

    auto loss_fn = [&]() { return batch_loss(params, batch, on).total; };
    Param& weight = params.top_pathway.layers[0].weight;
    for (size_t i : {size_t{0}, weight.value.size() - 1}) {
        const double fd = oracle::central_difference(loss_fn, weight.value.data()[i], 1e-5);
        REQUIRE(oracle::relative_error(weight.grad.data()[i], fd) < 1e-4);
    }
}

TEST_CASE("duplicating an example leaves the batch loss unchanged") {
    Prepared p = prepare_synthetic(30, 9);
    SFNetParams params = init_params(p.schema, Architecture::sfnet, small_widths(), 0.1, 0.01, 1);
    TrainConfig config = quick_config();

    std::vector<EncodedExample> once = {p.train[0]};
    std::vector<EncodedExample> twice = {p.train[0], p.train[0]};
    BatchLoss a = batch_loss(params, once, config);
    BatchLoss b = batch_loss(params, twice, config);
    REQUIRE(a.total == Catch::Approx(b.total).epsilon(1e-12));
    REQUIRE(a.l2_term == Catch::Approx(b.l2_term).epsilon(1e-12));
}

TEST_CASE("default embedding dropout substitution rates") {
    Prepared p = prepare_synthetic(50, 2);

    SECTION("rate 0 leaves the batch unchanged") {
        Rng rng(1);
        auto out = apply_default_embedding_dropout(p.train, 0.0, rng);
        REQUIRE(out == p.train);
    }

    SECTION("rate 1 replaces every categorical index with DEFAULT") {
        Rng rng(1);
        auto out = apply_default_embedding_dropout(p.train, 1.0, rng);
        for (const auto& ex : out) {
            for (uint32_t idx : ex.customer_cat) REQUIRE(idx == kDefaultIndex);
            for (uint32_t idx : ex.article_cat) REQUIRE(idx == kDefaultIndex);
        }
    }

    SECTION("rate 0.1 substitutes close to 10% of example-fields") {
        // build a large batch of examples whose indices are never DEFAULT
        std::vector<EncodedExample> batch;
        EncodedExample ex;
        ex.customer_cat = {2, 3, 4, 5};
        ex.article_cat = {2, 3, 4, 5};
        for (int i = 0; i < 12500; ++i) batch.push_back(ex);  // 1e5 example-fields

        Rng rng(77);
        auto out = apply_default_embedding_dropout(batch, 0.1, rng);
        size_t substituted = 0;
        for (const auto& e : out) {
            for (uint32_t idx : e.customer_cat) substituted += idx == kDefaultIndex;
            for (uint32_t idx : e.article_cat) substituted += idx == kDefaultIndex;
        }
        const double fraction = static_cast<double>(substituted) / 1e5;
        REQUIRE(fraction > 0.09);
        REQUIRE(fraction < 0.11);
    }
}

TEST_CASE("adam step with zero gradient leaves parameters bitwise unchanged") {
    Param p("p", Matrix{{0.5, -0.25}, {1.0, 2.0}});
    p.zero_grad();
    std::vector<Param*> params = {&p};
    AdamState state = init_adam_state(params);
    const Matrix before = p.value;
    REQUIRE(adam_step(params, state, AdamConfig{}));
    REQUIRE(p.value == before);
    REQUIRE(state.step == 1);
}

TEST_CASE("first adam step moves each coordinate by about the learning rate") {
    Param p("p", Matrix{{0.5, -0.25}});
    p.zero_grad();
    p.grad(0, 0) = 0.37;    // any non-tiny constant gradient
    p.grad(0, 1) = -1.4;
    std::vector<Param*> params = {&p};
    AdamState state = init_adam_state(params);
    AdamConfig cfg;
    REQUIRE(adam_step(params, state, cfg));
    REQUIRE(p.value(0, 0) == Catch::Approx(0.5 - cfg.learning_rate).epsilon(1e-6));
    REQUIRE(p.value(0, 1) == Catch::Approx(-0.25 + cfg.learning_rate).epsilon(1e-6));
}

TEST_CASE("parameters with equal gradient histories receive identical updates") {
    Param p("p", Matrix{{0.5, 0.5}});
    p.zero_grad();
    std::vector<Param*> params = {&p};
    AdamState state = init_adam_state(params);
    Rng rng(3);
    for (int step = 0; step < 10; ++step) {
        const double g = rng.uniform(-1.0, 1.0);
        p.grad(0, 0) = g;
        p.grad(0, 1) = g;
        REQUIRE(adam_step(params, state, AdamConfig{}));
        REQUIRE(p.value(0, 0) == p.value(0, 1));
    }
}

TEST_CASE("non-finite gradients skip the step entirely") {
    Param p("p", Matrix{{0.5}});
    p.zero_grad();
    p.grad(0, 0) = NAN;
    std::vector<Param*> params = {&p};
    AdamState state = init_adam_state(params);
    REQUIRE_FALSE(adam_step(params, state, AdamConfig{}));
    REQUIRE(p.value(0, 0) == 0.5);
    REQUIRE(state.step == 0);
}

TEST_CASE("row-sparse adam updates only active embedding rows") {
    Param table("emb", Matrix(4, 2, 0.5));
    table.zero_grad();
    table.grad(1, 0) = 0.3;
    table.grad(1, 1) = 0.3;
    std::vector<Param*> params = {&table};
    AdamState state = init_adam_state(params);
    ActiveRows active = {std::vector<uint32_t>{1}};
    REQUIRE(adam_step(params, state, AdamConfig{}, &active));
    REQUIRE(table.value(0, 0) == 0.5);  // untouched rows stay bitwise put
    REQUIRE(table.value(1, 0) != 0.5);
}

TEST_CASE("full sfnet gradients match central finite differences") {
    Prepared p = prepare_synthetic(40, 17);
    SFNetParams params = init_params(p.schema, Architecture::sfnet, small_widths(), 0.1, 0.01, 3);
    TrainConfig config = quick_config();

    std::vector<EncodedExample> batch(p.train.begin(), p.train.begin() + 4);

    params.zero_grad();
    Tape t;
    BatchInput batch_input = make_batch(batch);
    NodeId loss = batch_loss_node(t, params, batch_input, config);
    t.backward(loss);

    auto loss_fn = [&]() { return batch_loss(params, batch, config).total; };

    // sample dense coordinates and active embedding rows
    Rng rng(5);
    size_t checked = 0;
    for (Param* param : params.parameters()) {
        for (int draw = 0; draw < 3; ++draw) {
            const size_t i = rng.uniform_below(param->value.size());
            const double analytic = param->grad.data()[i];
            const double fd = oracle::central_difference(loss_fn, param->value.data()[i], 1e-5);
            REQUIRE(oracle::relative_error(analytic, fd) < 1e-4);
            ++checked;
        }
    }
    REQUIRE(checked >= 50);
}

TEST_CASE("mlp gradients match central finite differences") {
    Prepared p = prepare_synthetic(40, 19);
    SFNetParams params = init_params(p.schema, Architecture::mlp, small_widths(), 0.1, 0.01, 3);
    TrainConfig config = quick_config();
    std::vector<EncodedExample> batch(p.train.begin(), p.train.begin() + 4);

    params.zero_grad();
    Tape t;
    BatchInput batch_input = make_batch(batch);
    NodeId loss = batch_loss_node(t, params, batch_input, config);
    t.backward(loss);

    auto loss_fn = [&]() { return batch_loss(params, batch, config).total; };
    Rng rng(7);
    for (Param* param : params.parameters()) {
        for (int draw = 0; draw < 2; ++draw) {
            const size_t i = rng.uniform_below(param->value.size());
            const double fd = oracle::central_difference(loss_fn, param->value.data()[i], 1e-5);
            REQUIRE(oracle::relative_error(param->grad.data()[i], fd) < 1e-4);
        }
    }
}

TEST_CASE("training learns a deterministic rule") {
    // outcome is a pure function of the article category
    auto records = synthetic::make_records(200, 23);
    SplitSpec spec;
    spec.seed = 23;
    SplitIndices idx = split(records, spec);
    std::vector<InteractionRecord> train_records;
    for (size_t i : idx.train) train_records.push_back(records[i]);
    FeatureSchema schema = build_schema(train_records, modcloth_dialect());

    std::vector<EncodedExample> train_set = encode_all(records, idx.train, schema);
    std::vector<EncodedExample> val_set = encode_all(records, idx.validation, schema);

    TrainConfig config;
    config.batch_size = 64;
    config.max_epochs = 50;
    config.early_stop_patience = 50;
    config.seed = 23;

    TrainResult result = train(train_set, val_set, schema, Architecture::sfnet, config);

    SFNetParams model = result.params;
    Matrix probs = predict_probs(model, train_set);
    std::vector<uint32_t> targets;
    for (const auto& ex : train_set) targets.push_back(ex.outcome);
    const double train_accuracy = top_k_accuracy(probs, targets, 1);
    REQUIRE(train_accuracy >= 0.99);

    // training loss decreases over the first ten epochs
    REQUIRE(result.log.size() >= 10);
    REQUIRE(result.log[9].train_loss < result.log[0].train_loss);

    // best-validation bookkeeping is the running maximum of the log
    double best = -1.0;
    for (const auto& e : result.log) best = std::max(best, e.val_auc);
    REQUIRE(result.best_val_auc == Catch::Approx(best));

    // the snapshot reproduces its recorded validation AUC
    Matrix val_probs = predict_probs(model, val_set);
    std::vector<uint32_t> val_targets;
    for (const auto& ex : val_set) val_targets.push_back(ex.outcome);
    REQUIRE(micro_auc(val_probs, val_targets) == Catch::Approx(result.best_val_auc));
}

TEST_CASE("training is seed-deterministic down to checkpoint bytes") {
    Prepared p = prepare_synthetic(80, 31);
    TrainConfig config = quick_config(31);
    config.batch_size = 16;

    ModelWidths widths = small_widths();
    TrainResult r1 = train(p.train, p.val, p.schema, Architecture::sfnet, config, widths);
    TrainResult r2 = train(p.train, p.val, p.schema, Architecture::sfnet, config, widths);

    const fs::path c1 = temp_file("ck_a.bin");
    const fs::path c2 = temp_file("ck_b.bin");
    save_checkpoint(r1.params, p.schema, c1.string());
    save_checkpoint(r2.params, p.schema, c2.string());
    REQUIRE(read_bytes(c1) == read_bytes(c2));

    // a different seed changes the outcome
    TrainConfig other = config;
    other.seed = 32;
    TrainResult r3 = train(p.train, p.val, p.schema, Architecture::sfnet, other, widths);
    const fs::path c3 = temp_file("ck_c.bin");
    save_checkpoint(r3.params, p.schema, c3.string());
    REQUIRE(read_bytes(c1) != read_bytes(c3));
}

TEST_CASE("embedding rows never touched by data or dropout stay at initialization") {
    // every synthetic record carries category and ids, so the MISSING row of
    // those vocabularies is never gathered and never DEFAULT-substituted
    Prepared p = prepare_synthetic(60, 37);
    TrainConfig config = quick_config(37);
    config.batch_size = 16;

    ModelWidths widths = small_widths();
    SFNetParams init = init_params(p.schema, Architecture::sfnet, widths,
                                   config.l2_customer_emb, config.l2_article_emb, config.seed);
    TrainResult result = train(p.train, p.val, p.schema, Architecture::sfnet, config, widths);

    // article_categorical = [category, item_id]; both always present
    for (size_t table = 0; table < 2; ++table) {
        bool missing_seen = false;
        for (const auto& ex : p.train) missing_seen |= ex.article_cat[table] == kMissingIndex;
        REQUIRE_FALSE(missing_seen);

        const Param& before = init.article_embeddings[table].rows;
        const Param& after = result.params.article_embeddings[table].rows;
        for (size_t j = 0; j < before.value.cols(); ++j) {
            REQUIRE(after.value(kMissingIndex, j) == before.value(kMissingIndex, j));
        }
    }
}

TEST_CASE("training rejects empty splits and bad configs") {
    Prepared p = prepare_synthetic(40, 41);
    TrainConfig config = quick_config();
    REQUIRE_THROWS_AS(train({}, p.val, p.schema, Architecture::sfnet, config), contract_error);
    REQUIRE_THROWS_AS(train(p.train, {}, p.schema, Architecture::sfnet, config), contract_error);

    TrainConfig bad = config;
    bad.max_epochs = 200;
    REQUIRE_THROWS_AS(train(p.train, p.val, p.schema, Architecture::sfnet, bad), contract_error);
}

TEST_CASE("checkpoint round-trip reproduces forward outputs to 32-bit accuracy") {
    Prepared p = prepare_synthetic(50, 43);
    SFNetParams params = init_params(p.schema, Architecture::sfnet, small_widths(), 0.1, 0.01, 6);

    const fs::path path = temp_file("roundtrip.bin");
    save_checkpoint(params, p.schema, path.string());
    LoadedModel loaded = load_checkpoint(path.string());

    REQUIRE(loaded.params.parameter_count() == params.parameter_count());
    Matrix before = predict_probs(params, p.train);
    Matrix after = predict_probs(loaded.params, p.train);
    for (size_t i = 0; i < before.size(); ++i) {
        REQUIRE(std::abs(before.data()[i] - after.data()[i]) < 1e-6);
    }
}

TEST_CASE("checkpoint header inspection does not need tensor data") {
    Prepared p = prepare_synthetic(30, 47);
    SFNetParams params = init_params(p.schema, Architecture::sfnet, small_widths(), 0.1, 0.01, 6);
    const fs::path path = temp_file("header.bin");
    save_checkpoint(params, p.schema, path.string());

    nlohmann::json header = read_checkpoint_header(path.string());
    REQUIRE(header.at("architecture") == "sfnet");
    REQUIRE(header.at("widths").at("pathway") == std::vector<size_t>{6, 4});
    REQUIRE(header.at("widths").at("top") == std::vector<size_t>{8, 5});
    REQUIRE(header.at("n_outcomes") == 3);
}

TEST_CASE("truncated checkpoints fail cleanly") {
    Prepared p = prepare_synthetic(30, 53);
    SFNetParams params = init_params(p.schema, Architecture::sfnet, small_widths(), 0.1, 0.01, 6);
    const fs::path path = temp_file("truncated.bin");
    save_checkpoint(params, p.schema, path.string());

    fs::resize_file(path, fs::file_size(path) - 64);
    REQUIRE_THROWS_AS(load_checkpoint(path.string()), data_error);
}

TEST_CASE("checkpoint schema hash mismatches name both hashes") {
    Prepared p = prepare_synthetic(30, 59);
    SFNetParams params = init_params(p.schema, Architecture::sfnet, small_widths(), 0.1, 0.01, 6);
    const fs::path path = temp_file("hash.bin");
    save_checkpoint(params, p.schema, path.string());

    const uint64_t expected = schema_hash(p.schema);
    REQUIRE_NOTHROW(load_checkpoint(path.string(), expected));
    try {
        load_checkpoint(path.string(), expected + 1);
        FAIL("expected data_error");
    } catch (const data_error& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find(std::to_string(expected)) != std::string::npos);
        REQUIRE(msg.find(std::to_string(expected + 1)) != std::string::npos);
    }
}

TEST_CASE("train log csv has the documented columns") {
    std::vector<EpochLog> log = {{1, 1.09, 0.51, 0.4, -1.1, 0.25}};
    const fs::path path = temp_file("log.csv");
    write_train_log_csv(path.string(), log);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "epoch,train_loss,val_auc,val_accuracy,val_avg_ll,wall_seconds");
    std::string line;
    std::getline(in, line);
    REQUIRE(line.substr(0, 2) == "1,");
}
