#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "graphtrans/config.hpp"
#include "graphtrans/gradcheck_suite.hpp"
#include "graphtrans/tu_io.hpp"

namespace fs = std::filesystem;
using namespace graphtrans;

namespace {

constexpr double kOpThreshold = 1e-5;
constexpr double kModelThreshold = 1e-4;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::string seeds_range;
    int precision = 32;
    std::string dataset_dir;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "config file path");
    cmd->add_option("--set", o.sets, "override, dotted key=value (repeatable)");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed, "run seed");
    cmd->add_option("--seeds", o.seeds_range, "inclusive seed range N..M");
    cmd->add_option("--precision", o.precision, "float width")
        ->check(CLI::IsMember({32, 64}));
    cmd->add_option("--dataset-dir", o.dataset_dir, "dataset root directory");
}

RunConfig assemble_config(const CommonOpts& o) {
    RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config_file(o.config_path);
    apply_overrides(cfg, o.sets);
    if (!o.dataset_dir.empty()) cfg.dataset_dir = o.dataset_dir;
    validate_run_config(cfg);
    return cfg;
}

std::vector<std::uint64_t> seed_list(const CommonOpts& o) {
    if (o.seeds_range.empty()) return {o.seed};
    const auto dots = o.seeds_range.find("..");
    if (dots == std::string::npos) {
        return {static_cast<std::uint64_t>(std::stoull(o.seeds_range))};
    }
    const auto lo = std::stoull(o.seeds_range.substr(0, dots));
    const auto hi = std::stoull(o.seeds_range.substr(dots + 2));
    if (hi < lo) throw ConfigError("--seeds: range end below start");
    std::vector<std::uint64_t> out;
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
    return out;
}

Dataset resolve_dataset(const RunConfig& cfg, std::uint64_t seed) {
    if (cfg.dataset_name == "cycle-pairs") {
        return make_cycle_pair_dataset(cfg.cycle_pairs, derive_seed(seed, 7));
    }
    const std::string dir = cfg.dataset_dir + "/" + cfg.dataset_name;
    try {
        return load_tu_dataset(dir, cfg.dataset_name);
    } catch (const LoadError& e) {
        throw LoadError(std::string(e.what()) + "\n  dataset '" + cfg.dataset_name +
                        "' is expected under " + dir +
                        "; download https://www.chrsmrrs.com/graphkerneldatasets/" +
                        cfg.dataset_name + ".zip and extract it there");
    }
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw LoadError("cannot open " + path);
    os << content;
}

void write_resolved(const CommonOpts& o, const RunConfig& cfg) {
    fs::create_directories(o.out_dir);
    write_file(o.out_dir + "/resolved.cfg", resolved_config_text(cfg));
}

void mean_std(const std::vector<double>& xs, double& mean, double& stddev) {
    mean = 0.0;
    for (const double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (const double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    stddev = std::sqrt(var);
}

template <class S>
void save_run_checkpoints(const std::string& dir, const RunConfig& cfg,
                          const Dataset& ds, TrainOutput<S>& out) {
    if (cfg.mode == TrainMode::FULL) {
        ParamList<S> all;
        out.params.collect(all);
        save_checkpoint(dir + "/checkpoint.bin", all,
                        config_fingerprint(model_arch_string(
                            cfg.gnn, cfg.tf, ds.num_node_label_values, ds.num_classes)));
    } else {
        ParamList<S> all;
        out.gnn_only.collect(all);
        save_checkpoint(dir + "/checkpoint.bin", all,
                        config_fingerprint(gnn_only_arch_string(
                            cfg.gnn, ds.num_node_label_values, ds.num_classes)));
        // the transferable piece of the two-phase protocol: gnn weights alone
        ParamList<S> gnn_list;
        out.gnn_only.gnn.collect(gnn_list);
        save_checkpoint(dir + "/gnn.bin", gnn_list,
                        config_fingerprint(
                            gnn_arch_string(cfg.gnn, ds.num_node_label_values)));
    }
}

struct SeedRun {
    std::uint64_t seed = 0;
    RunResult result;
};

template <class S>
std::vector<SeedRun> run_seed_sweep(const CommonOpts& o, const RunConfig& cfg,
                                    bool verbose_epochs) {
    std::vector<SeedRun> runs;
    for (const auto seed : seed_list(o)) {
        auto ds = resolve_dataset(cfg, seed);
        auto splits = split(ds, cfg.split_train, cfg.split_valid, derive_seed(seed, 4));
        const std::string dir = o.out_dir + "/seed" + std::to_string(seed);
        fs::create_directories(dir);

        auto on_epoch = [&](int epoch, const RunResult& r) {
            if (!verbose_epochs) return;
            std::cout << "seed " << seed << " epoch " << epoch
                      << ": lr=" << format_double(r.lr.back())
                      << " loss=" << format_double(r.train_loss.back())
                      << " val=" << format_double(r.val_acc.back())
                      << " test=" << format_double(r.test_acc.back()) << "\n";
        };
        auto out = train<S>(splits, cfg.gnn, cfg.tf, cfg.training, cfg.mode, seed, on_epoch);

        std::ostringstream metrics;
        write_metrics_csv(out.result, metrics);
        write_file(dir + "/metrics.csv", metrics.str());
        save_run_checkpoints(dir, cfg, ds, out);

        std::cout << "seed " << seed << ": best epoch " << out.result.best_epoch
                  << ", val " << format_double(out.result.best_val_acc) << ", test "
                  << format_double(out.result.test_at_best) << " ("
                  << format_double(out.result.forward_ms) << " ms fwd, "
                  << format_double(out.result.backward_ms) << " ms bwd per iter)\n";
        runs.push_back({seed, out.result});
    }
    return runs;
}

void write_summary(const std::string& path, const std::vector<SeedRun>& runs) {
    std::string csv = "# schema: summary/v1\nseed,best_epoch,best_val_acc,test_acc\n";
    std::vector<double> accs;
    for (const auto& run : runs) {
        csv += std::to_string(run.seed) + "," + std::to_string(run.result.best_epoch) +
               "," + format_double(run.result.best_val_acc) + "," +
               format_double(run.result.test_at_best) + "\n";
        accs.push_back(run.result.test_at_best);
    }
    write_file(path, csv);
    double mean = 0.0, stddev = 0.0;
    mean_std(accs, mean, stddev);
    std::cout << "test accuracy over " << runs.size() << " seed(s): mean "
              << format_double(mean) << ", std " << format_double(stddev) << "\n";
}

template <class S>
int cmd_train(const CommonOpts& o) {
    const RunConfig cfg = assemble_config(o);
    write_resolved(o, cfg);
    auto runs = run_seed_sweep<S>(o, cfg, true);
    write_summary(o.out_dir + "/summary.csv", runs);
    return 0;
}

template <class S>
int cmd_eval(const CommonOpts& o, const std::string& ckpt) {
    const RunConfig cfg = assemble_config(o);
    write_resolved(o, cfg);
    auto ds = resolve_dataset(cfg, o.seed);
    auto splits = split(ds, cfg.split_train, cfg.split_valid, derive_seed(o.seed, 4));

    Rng init_rng(derive_seed(o.seed, 1));
    double acc = 0.0;
    if (cfg.mode == TrainMode::FULL) {
        auto params = init_graphtrans_params<S>(cfg.gnn, cfg.tf, ds.num_node_label_values,
                                                ds.num_classes, init_rng);
        ParamList<S> all;
        params.collect(all);
        load_checkpoint(ckpt, all,
                        config_fingerprint(model_arch_string(
                            cfg.gnn, cfg.tf, ds.num_node_label_values, ds.num_classes)));
        acc = evaluate(splits.test, cfg.gnn, cfg.tf, params, cfg.training.batch_size);
    } else {
        auto params = init_gnn_only_params<S>(cfg.gnn, ds.num_node_label_values,
                                              ds.num_classes, init_rng);
        ParamList<S> all;
        params.collect(all);
        load_checkpoint(ckpt, all,
                        config_fingerprint(gnn_only_arch_string(
                            cfg.gnn, ds.num_node_label_values, ds.num_classes)));
        acc = evaluate_logits<S>(splits.test, cfg.training.batch_size, cfg.gnn.gnn_type,
                                 [&](const Batch<S>& b) {
                                     return gnn_only_logits(b, cfg.gnn, params);
                                 });
    }
    std::cout << "test_acc = " << format_double(acc) << "\n";
    write_file(o.out_dir + "/eval.csv",
               "# schema: eval/v1\nsplit,accuracy\ntest," + format_double(acc) + "\n");
    return 0;
}

// Always 64-bit: the thresholds are finite-difference limits for doubles.
int cmd_gradcheck(const CommonOpts& o) {
    fs::create_directories(o.out_dir);
    bool failed = false;
    std::string csv = "# schema: gradcheck/v1\ncheck,max_rel_err,threshold,status\n";

    for (const auto& check : run_op_gradchecks()) {
        const bool ok = check.max_rel_err < kOpThreshold;
        failed = failed || !ok;
        std::cout << "op " << check.name << ": max rel err "
                  << format_double(check.max_rel_err) << (ok ? " (pass)" : " (FAIL)")
                  << "\n";
        csv += "op:" + check.name + "," + format_double(check.max_rel_err) + "," +
               format_double(kOpThreshold) + "," + (ok ? "pass" : "fail") + "\n";
    }

    const auto report = run_model_gradcheck();
    const bool model_ok = report.max_rel_err < kModelThreshold;
    failed = failed || !model_ok;
    std::cout << "full model: max rel err " << format_double(report.max_rel_err)
              << " (worst " << report.worst_param << "[" << report.worst_index << "], "
              << report.entries_checked << " entries)" << (model_ok ? " (pass)" : " (FAIL)")
              << "\n";
    csv += "model:graphtrans," + format_double(report.max_rel_err) + "," +
           format_double(kModelThreshold) + "," + (model_ok ? "pass" : "fail") + "\n";

    write_file(o.out_dir + "/gradcheck.csv", csv);
    return failed ? 1 : 0;
}

std::vector<int> parse_int_csv(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

std::vector<double> parse_double_csv(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

template <class S>
int cmd_profile(const CommonOpts& o, const std::string& nodes_csv,
                const std::string& densities_csv, int warmup, int timed) {
    const RunConfig cfg = assemble_config(o);
    write_resolved(o, cfg);
    ProfileOptions opts;
    opts.warmup = warmup;
    opts.timed = timed;
    auto cells = profile<S>(parse_int_csv(nodes_csv), parse_double_csv(densities_csv),
                            cfg.gnn, cfg.tf, o.seed, opts);
    std::ostringstream csv;
    write_profile_csv(cells, csv);
    write_file(o.out_dir + "/profile.csv", csv.str());
    for (const auto& c : cells) {
        std::cout << "n=" << c.nodes << " density=" << format_double(c.density) << ": ";
        if (c.oom) {
            std::cout << "OOM\n";
        } else {
            std::cout << "iter " << format_double(c.iter_mean_ms) << " ms (fwd "
                      << format_double(c.forward_mean_ms) << ", bwd "
                      << format_double(c.backward_mean_ms) << ")\n";
        }
    }
    return 0;
}

template <class S>
int cmd_export_attention(const CommonOpts& o, const std::string& ckpt, int max_graphs) {
    const RunConfig cfg = assemble_config(o);
    if (cfg.mode != TrainMode::FULL) {
        throw ConfigError("export-attention requires training.mode = full");
    }
    write_resolved(o, cfg);
    auto ds = resolve_dataset(cfg, o.seed);
    auto splits = split(ds, cfg.split_train, cfg.split_valid, derive_seed(o.seed, 4));

    Rng init_rng(derive_seed(o.seed, 1));
    auto params = init_graphtrans_params<S>(cfg.gnn, cfg.tf, ds.num_node_label_values,
                                            ds.num_classes, init_rng);
    ParamList<S> all;
    params.collect(all);
    load_checkpoint(ckpt, all,
                    config_fingerprint(model_arch_string(
                        cfg.gnn, cfg.tf, ds.num_node_label_values, ds.num_classes)));

    const int count = std::min<int>(max_graphs, static_cast<int>(splits.test.size()));
    if (count == 0) throw ValueError("export-attention: empty test split");
    std::vector<Graph> chunk(splits.test.graphs.begin(),
                             splits.test.graphs.begin() + count);
    auto batch = make_batch<S>(chunk, cfg.gnn.gnn_type, ds.num_node_label_values);
    auto fwd = graphtrans_forward(batch, cfg.gnn, cfg.tf, params, false, nullptr, true);

    const std::string dir = o.out_dir + "/attention";
    fs::create_directories(dir);
    for (const auto& m : fwd.attention) {
        std::ostringstream os;
        write_attention_csv(m, os);
        write_file(dir + "/graph" + std::to_string(m.graph) + "_layer" +
                       std::to_string(m.layer) + "_head" + std::to_string(m.head) + ".csv",
                   os.str());
    }
    std::cout << "wrote " << fwd.attention.size() << " attention maps for " << count
              << " graph(s) to " << dir << "\n";
    return 0;
}

template <class S>
int cmd_ablate_readout(const CommonOpts& o) {
    const RunConfig base = assemble_config(o);
    if (base.mode != TrainMode::FULL) {
        throw ConfigError("ablate-readout requires training.mode = full");
    }
    write_resolved(o, base);

    const std::vector<Readout> modes = {Readout::MEAN, Readout::LAST, Readout::CLS,
                                        Readout::CLS_CAT};
    std::string runs_csv = "# schema: ablate-runs/v1\nreadout,seed,best_val_acc,test_acc\n";
    std::string summary_csv = "# schema: ablate/v1\nreadout,mean_test_acc,std_test_acc\n";
    for (const auto mode : modes) {
        CommonOpts mode_opts = o;
        mode_opts.out_dir = o.out_dir + "/" + readout_name(mode);
        RunConfig cfg = base;
        cfg.tf.readout = mode;
        std::cout << "readout " << readout_name(mode) << ":\n";
        auto runs = run_seed_sweep<S>(mode_opts, cfg, false);
        std::vector<double> accs;
        for (const auto& run : runs) {
            runs_csv += std::string(readout_name(mode)) + "," + std::to_string(run.seed) +
                        "," + format_double(run.result.best_val_acc) + "," +
                        format_double(run.result.test_at_best) + "\n";
            accs.push_back(run.result.test_at_best);
        }
        double mean = 0.0, stddev = 0.0;
        mean_std(accs, mean, stddev);
        summary_csv += std::string(readout_name(mode)) + "," + format_double(mean) + "," +
                       format_double(stddev) + "\n";
    }
    write_file(o.out_dir + "/ablate_runs.csv", runs_csv);
    write_file(o.out_dir + "/ablate_summary.csv", summary_csv);
    std::cout << "wrote " << o.out_dir << "/ablate_summary.csv\n";
    return 0;
}

template <class F32, class F64>
int dispatch_precision(int precision, F32&& f32, F64&& f64) {
    return precision == 64 ? f64() : f32();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph classification with a gnn + transformer stack"};
    app.require_subcommand(1);

    CommonOpts o;
    std::string ckpt;
    int max_graphs = 8;
    std::string nodes_csv = "500,1000,1200";
    std::string densities_csv = "0.2,0.4";
    int warmup = 5, timed = 20;

    auto* train_cmd = app.add_subcommand("train", "train a model, write metrics + checkpoint");
    add_common(train_cmd, o);
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    add_common(eval_cmd, o);
    eval_cmd->add_option("--checkpoint", ckpt, "checkpoint path")->required();
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    add_common(grad_cmd, o);
    auto* profile_cmd = app.add_subcommand("profile", "iteration-time scaling benchmark");
    add_common(profile_cmd, o);
    profile_cmd->add_option("--nodes", nodes_csv, "node counts, comma separated");
    profile_cmd->add_option("--densities", densities_csv, "edge densities, comma separated");
    profile_cmd->add_option("--warmup", warmup, "warm-up iterations per cell");
    profile_cmd->add_option("--timed", timed, "timed iterations per cell");
    auto* export_cmd =
        app.add_subcommand("export-attention", "dump per-graph attention maps as CSV");
    add_common(export_cmd, o);
    export_cmd->add_option("--checkpoint", ckpt, "checkpoint path")->required();
    export_cmd->add_option("--graphs", max_graphs, "number of test graphs to export");
    auto* ablate_cmd =
        app.add_subcommand("ablate-readout", "train each readout mode on shared seeds");
    add_common(ablate_cmd, o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            return dispatch_precision(
                o.precision, [&] { return cmd_train<float>(o); },
                [&] { return cmd_train<double>(o); });
        }
        if (eval_cmd->parsed()) {
            return dispatch_precision(
                o.precision, [&] { return cmd_eval<float>(o, ckpt); },
                [&] { return cmd_eval<double>(o, ckpt); });
        }
        if (grad_cmd->parsed()) return cmd_gradcheck(o);
        if (profile_cmd->parsed()) {
            return dispatch_precision(
                o.precision,
                [&] { return cmd_profile<float>(o, nodes_csv, densities_csv, warmup, timed); },
                [&] {
                    return cmd_profile<double>(o, nodes_csv, densities_csv, warmup, timed);
                });
        }
        if (export_cmd->parsed()) {
            return dispatch_precision(
                o.precision, [&] { return cmd_export_attention<float>(o, ckpt, max_graphs); },
                [&] { return cmd_export_attention<double>(o, ckpt, max_graphs); });
        }
        if (ablate_cmd->parsed()) {
            return dispatch_precision(
                o.precision, [&] { return cmd_ablate_readout<float>(o); },
                [&] { return cmd_ablate_readout<double>(o); });
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
