#pragma once

#include <string>
#include <vector>

#include "graphtrans/training.hpp"

namespace graphtrans {

// Full description of one run, assembled from defaults, an optional config
// file, and command-line overrides. The file grammar is line-based:
//   - `dotted.key = value` pairs, one per line
//   - blank lines and lines starting with `#` are ignored
//   - duplicate keys within one file are rejected; overrides may repeat
//     (the last assignment wins)
// Unknown keys are rejected with the offending key path.
struct RunConfig {
    std::string dataset_name = "cycle-pairs";
    std::string dataset_dir = "data";
    int cycle_pairs = 60;  // fixture size when dataset.name = cycle-pairs
    double split_train = 0.8;
    double split_valid = 0.1;
    GnnConfig gnn;
    TransformerConfig tf;
    TrainConfig training;
    TrainMode mode = TrainMode::FULL;
};

// Assign one key; throws ConfigError naming the key on unknown keys or
// malformed values.
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

// Parse a whole config file body on top of defaults.
RunConfig parse_config_text(const std::string& text);

// Read and parse a config file; LoadError if the file cannot be opened.
RunConfig load_config_file(const std::string& path);

// Apply `key=value` override strings in order (later assignments win).
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& sets);

// Canonical snapshot of every key; parseable by parse_config_text and stable
// across runs for identical configs.
std::string resolved_config_text(const RunConfig& cfg);

// Cross-field validation of the assembled run description.
void validate_run_config(const RunConfig& cfg);

}  // namespace graphtrans
