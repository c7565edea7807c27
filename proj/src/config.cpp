#include "graphtrans/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace graphtrans {

namespace {

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    if (value.empty()) return out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_int(key, item));
    }
    return out;
}

std::string join_int_list(const std::vector<int>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i > 0) out += ',';
        out += std::to_string(xs[i]);
    }
    return out;
}

GnnType parse_gnn_type(const std::string& key, const std::string& value) {
    if (value == "gcn") return GnnType::GCN;
    if (value == "gin") return GnnType::GIN;
    throw ConfigError(key + ": expected gcn or gin, got '" + value + "'");
}

Readout parse_readout(const std::string& key, const std::string& value) {
    if (value == "cls") return Readout::CLS;
    if (value == "mean") return Readout::MEAN;
    if (value == "last") return Readout::LAST;
    if (value == "cls_cat") return Readout::CLS_CAT;
    throw ConfigError(key + ": expected cls, mean, last or cls_cat, got '" + value + "'");
}

TrainMode parse_mode(const std::string& key, const std::string& value) {
    if (value == "full") return TrainMode::FULL;
    if (value == "gnn_only") return TrainMode::GNN_ONLY;
    throw ConfigError(key + ": expected full or gnn_only, got '" + value + "'");
}

struct KeySpec {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeySpec>& config_keys() {
    static const std::vector<KeySpec> keys = {
        {"dataset.name", [](RunConfig& c, const std::string& v) { c.dataset_name = v; },
         [](const RunConfig& c) { return c.dataset_name; }},
        {"dataset.dir", [](RunConfig& c, const std::string& v) { c.dataset_dir = v; },
         [](const RunConfig& c) { return c.dataset_dir; }},
        {"dataset.cycle_pairs",
         [](RunConfig& c, const std::string& v) {
             c.cycle_pairs = parse_int("dataset.cycle_pairs", v);
         },
         [](const RunConfig& c) { return std::to_string(c.cycle_pairs); }},
        {"split.train",
         [](RunConfig& c, const std::string& v) {
             c.split_train = parse_double("split.train", v);
         },
         [](const RunConfig& c) { return format_double(c.split_train); }},
        {"split.valid",
         [](RunConfig& c, const std::string& v) {
             c.split_valid = parse_double("split.valid", v);
         },
         [](const RunConfig& c) { return format_double(c.split_valid); }},
        {"model.gnn.type",
         [](RunConfig& c, const std::string& v) {
             c.gnn.gnn_type = parse_gnn_type("model.gnn.type", v);
         },
         [](const RunConfig& c) { return gnn_type_name(c.gnn.gnn_type); }},
        {"model.gnn.layers",
         [](RunConfig& c, const std::string& v) {
             c.gnn.num_layers = parse_int("model.gnn.layers", v);
         },
         [](const RunConfig& c) { return std::to_string(c.gnn.num_layers); }},
        {"model.gnn.hidden",
         [](RunConfig& c, const std::string& v) {
             c.gnn.hidden_dim = parse_int("model.gnn.hidden", v);
         },
         [](const RunConfig& c) { return std::to_string(c.gnn.hidden_dim); }},
        {"model.gnn.dropout",
         [](RunConfig& c, const std::string& v) {
             c.gnn.dropout = parse_double("model.gnn.dropout", v);
         },
         [](const RunConfig& c) { return format_double(c.gnn.dropout); }},
        {"model.gnn.virtual_node",
         [](RunConfig& c, const std::string& v) {
             c.gnn.use_virtual_node = parse_bool("model.gnn.virtual_node", v);
         },
         [](const RunConfig& c) { return c.gnn.use_virtual_node ? "true" : "false"; }},
        {"model.tf.d",
         [](RunConfig& c, const std::string& v) { c.tf.d_tf = parse_int("model.tf.d", v); },
         [](const RunConfig& c) { return std::to_string(c.tf.d_tf); }},
        {"model.tf.ffn",
         [](RunConfig& c, const std::string& v) {
             c.tf.ffn_dim = parse_int("model.tf.ffn", v);
         },
         [](const RunConfig& c) { return std::to_string(c.tf.ffn_dim); }},
        {"model.tf.layers",
         [](RunConfig& c, const std::string& v) {
             c.tf.num_layers = parse_int("model.tf.layers", v);
         },
         [](const RunConfig& c) { return std::to_string(c.tf.num_layers); }},
        {"model.tf.heads",
         [](RunConfig& c, const std::string& v) {
             c.tf.num_heads = parse_int("model.tf.heads", v);
         },
         [](const RunConfig& c) { return std::to_string(c.tf.num_heads); }},
        {"model.tf.dropout",
         [](RunConfig& c, const std::string& v) {
             c.tf.dropout = parse_double("model.tf.dropout", v);
         },
         [](const RunConfig& c) { return format_double(c.tf.dropout); }},
        {"model.tf.readout",
         [](RunConfig& c, const std::string& v) {
             c.tf.readout = parse_readout("model.tf.readout", v);
         },
         [](const RunConfig& c) { return readout_name(c.tf.readout); }},
        {"model.tf.mask_schedule",
         [](RunConfig& c, const std::string& v) {
             c.tf.mask_schedule = parse_int_list("model.tf.mask_schedule", v);
         },
         [](const RunConfig& c) { return join_int_list(c.tf.mask_schedule); }},
        {"training.mode",
         [](RunConfig& c, const std::string& v) { c.mode = parse_mode("training.mode", v); },
         [](const RunConfig& c) {
             return c.mode == TrainMode::FULL ? "full" : "gnn_only";
         }},
        {"training.epochs",
         [](RunConfig& c, const std::string& v) {
             c.training.epochs = parse_int("training.epochs", v);
         },
         [](const RunConfig& c) { return std::to_string(c.training.epochs); }},
        {"training.batch",
         [](RunConfig& c, const std::string& v) {
             c.training.batch_size = parse_int("training.batch", v);
         },
         [](const RunConfig& c) { return std::to_string(c.training.batch_size); }},
        {"training.lr",
         [](RunConfig& c, const std::string& v) {
             c.training.lr = parse_double("training.lr", v);
         },
         [](const RunConfig& c) { return format_double(c.training.lr); }},
        {"training.weight_decay",
         [](RunConfig& c, const std::string& v) {
             c.training.weight_decay = parse_double("training.weight_decay", v);
         },
         [](const RunConfig& c) { return format_double(c.training.weight_decay); }},
        {"training.beta1",
         [](RunConfig& c, const std::string& v) {
             c.training.beta1 = parse_double("training.beta1", v);
         },
         [](const RunConfig& c) { return format_double(c.training.beta1); }},
        {"training.beta2",
         [](RunConfig& c, const std::string& v) {
             c.training.beta2 = parse_double("training.beta2", v);
         },
         [](const RunConfig& c) { return format_double(c.training.beta2); }},
        {"training.adam_eps",
         [](RunConfig& c, const std::string& v) {
             c.training.adam_eps = parse_double("training.adam_eps", v);
         },
         [](const RunConfig& c) { return format_double(c.training.adam_eps); }},
        {"training.cosine",
         [](RunConfig& c, const std::string& v) {
             c.training.cosine_anneal = parse_bool("training.cosine", v);
         },
         [](const RunConfig& c) { return c.training.cosine_anneal ? "true" : "false"; }},
        {"training.freeze_gnn",
         [](RunConfig& c, const std::string& v) {
             c.training.freeze_gnn = parse_bool("training.freeze_gnn", v);
         },
         [](const RunConfig& c) { return c.training.freeze_gnn ? "true" : "false"; }},
        {"training.pretrained_gnn",
         [](RunConfig& c, const std::string& v) { c.training.pretrained_gnn = v; },
         [](const RunConfig& c) { return c.training.pretrained_gnn; }},
    };
    return keys;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& spec : config_keys()) {
        if (key == spec.key) {
            spec.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key: " + key);
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value', got '" + stripped + "'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        }
        if (!seen.insert(key).second) {
            throw ConfigError("duplicate config key: " + key);
        }
        set_config_key(cfg, key, value);
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw LoadError("cannot open " + path);
    std::stringstream buffer;
    buffer << is.rdbuf();
    return parse_config_text(buffer.str());
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& sets) {
    for (const auto& entry : sets) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override must look like key=value, got '" + entry + "'");
        }
        set_config_key(cfg, trim(entry.substr(0, eq)), trim(entry.substr(eq + 1)));
    }
}

std::string resolved_config_text(const RunConfig& cfg) {
    std::string out = "# resolved config\n";
    for (const auto& spec : config_keys()) {
        out += std::string(spec.key) + " = " + spec.get(cfg) + "\n";
    }
    return out;
}

void validate_run_config(const RunConfig& cfg) {
    if (cfg.dataset_name.empty()) throw ConfigError("dataset.name: must not be empty");
    if (cfg.dataset_name == "cycle-pairs" && cfg.cycle_pairs < 1) {
        throw ConfigError("dataset.cycle_pairs: must be >= 1");
    }
    if (!(cfg.split_train > 0.0) || cfg.split_valid < 0.0 ||
        cfg.split_train + cfg.split_valid >= 1.0) {
        throw ConfigError(
            "split.train/split.valid: need 0 < train, 0 <= valid, train + valid < 1");
    }
    validate_gnn_config(cfg.gnn);
    if (cfg.mode == TrainMode::FULL) validate_transformer_config(cfg.tf);
    validate_train_config(cfg.training);
}

}  // namespace graphtrans
