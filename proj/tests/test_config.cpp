#include <doctest.h>

#include <string>
#include <vector>

#include "graphtrans/config.hpp"

using namespace graphtrans;

TEST_CASE("defaults survive a resolved-text round trip") {
    RunConfig cfg;
    const std::string text = resolved_config_text(cfg);
    RunConfig reparsed = parse_config_text(text);
    CHECK(resolved_config_text(reparsed) == text);
    CHECK_NOTHROW(validate_run_config(reparsed));
}

TEST_CASE("keys assign the fields they name") {
    RunConfig cfg;
    set_config_key(cfg, "model.gnn.type", "gin");
    set_config_key(cfg, "model.gnn.layers", "5");
    set_config_key(cfg, "model.tf.readout", "cls_cat");
    set_config_key(cfg, "model.tf.mask_schedule", "1,2,0");
    set_config_key(cfg, "training.mode", "gnn_only");
    set_config_key(cfg, "training.cosine", "false");
    set_config_key(cfg, "training.lr", "0.003");
    set_config_key(cfg, "dataset.name", "NCI1");
    CHECK(cfg.gnn.gnn_type == GnnType::GIN);
    CHECK(cfg.gnn.num_layers == 5);
    CHECK(cfg.tf.readout == Readout::CLS_CAT);
    CHECK(cfg.tf.mask_schedule == std::vector<int>{1, 2, 0});
    CHECK(cfg.mode == TrainMode::GNN_ONLY);
    CHECK_FALSE(cfg.training.cosine_anneal);
    CHECK(cfg.training.lr == 0.003);
    CHECK(cfg.dataset_name == "NCI1");
}

TEST_CASE("unknown keys and malformed values are rejected with the key path") {
    RunConfig cfg;
    CHECK_THROWS_WITH_AS(set_config_key(cfg, "model.gnn.depth", "3"),
                         "unknown config key: model.gnn.depth", ConfigError);
    CHECK_THROWS_AS(set_config_key(cfg, "model.gnn.layers", "three"), ConfigError);
    CHECK_THROWS_AS(set_config_key(cfg, "training.lr", "fast"), ConfigError);
    CHECK_THROWS_AS(set_config_key(cfg, "training.cosine", "yes"), ConfigError);
    CHECK_THROWS_AS(set_config_key(cfg, "model.tf.readout", "virtual"), ConfigError);
    CHECK_THROWS_AS(set_config_key(cfg, "model.gnn.type", "gat"), ConfigError);
    CHECK_THROWS_AS(set_config_key(cfg, "model.tf.mask_schedule", "1,x"), ConfigError);
}

TEST_CASE("config text parsing: comments, blanks, duplicates, bad lines") {
    const std::string good =
        "# a comment\n"
        "\n"
        "model.gnn.hidden = 64\n"
        "  model.tf.d = 64  \n";
    RunConfig cfg = parse_config_text(good);
    CHECK(cfg.gnn.hidden_dim == 64);
    CHECK(cfg.tf.d_tf == 64);

    CHECK_THROWS_AS(parse_config_text("model.gnn.hidden = 1\nmodel.gnn.hidden = 2\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_text("model.gnn.hidden\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("= 3\n"), ConfigError);
}

TEST_CASE("overrides apply in order with the last assignment winning") {
    RunConfig cfg;
    apply_overrides(cfg, {"training.epochs=7", "training.epochs=9", "model.tf.heads=8"});
    CHECK(cfg.training.epochs == 9);
    CHECK(cfg.tf.num_heads == 8);
    CHECK_THROWS_AS(apply_overrides(cfg, {"training.epochs"}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(cfg, {"nope=1"}), ConfigError);
}

TEST_CASE("empty mask schedule round-trips as the dense stack") {
    RunConfig cfg;
    set_config_key(cfg, "model.tf.mask_schedule", "");
    CHECK(cfg.tf.mask_schedule.empty());
    const std::string text = resolved_config_text(cfg);
    CHECK(parse_config_text(text).tf.mask_schedule.empty());
}

TEST_CASE("run-config validation catches cross-field problems") {
    RunConfig cfg;
    cfg.split_train = 0.9;
    cfg.split_valid = 0.2;
    CHECK_THROWS_AS(validate_run_config(cfg), ConfigError);

    cfg = RunConfig{};
    cfg.tf.mask_schedule = {1, 1};  // wrong length for 4 layers
    CHECK_THROWS_AS(validate_run_config(cfg), ConfigError);

    cfg = RunConfig{};
    cfg.mode = TrainMode::GNN_ONLY;
    cfg.tf.mask_schedule = {1, 1};  // transformer ignored in gnn_only mode
    CHECK_NOTHROW(validate_run_config(cfg));

    cfg = RunConfig{};
    cfg.dataset_name = "";
    CHECK_THROWS_AS(validate_run_config(cfg), ConfigError);
}

TEST_CASE("shipped presets parse and validate") {
    const std::vector<std::string> presets = {
        "nci-small.cfg",    "nci-large.cfg", "transformer-only.cfg",
        "masked.cfg",       "hybrid.cfg",    "cycle-demo.cfg",
    };
    for (const auto& name : presets) {
        CAPTURE(name);
        RunConfig cfg = load_config_file(std::string(GT_CONFIG_DIR) + "/" + name);
        CHECK_NOTHROW(validate_run_config(cfg));
        const std::string text = resolved_config_text(cfg);
        CHECK(resolved_config_text(parse_config_text(text)) == text);
    }
    CHECK_THROWS_AS(load_config_file("/tmp/gt_no_such_config.cfg"), LoadError);
}
