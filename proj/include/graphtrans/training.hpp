#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <new>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "graphtrans/transformer.hpp"

namespace graphtrans {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 256;
    double lr = 1e-4;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    bool cosine_anneal = true;
    bool freeze_gnn = false;
    std::string pretrained_gnn;  // checkpoint path; empty = train from scratch
};

inline void validate_train_config(const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw ConfigError("training: epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("training: batch_size must be >= 1");
    // lr 0 is allowed as a diagnostic no-op configuration
    if (cfg.lr < 0) throw ConfigError("training: lr must be >= 0");
    if (cfg.weight_decay < 0) throw ConfigError("training: weight_decay must be >= 0");
    if (!(cfg.beta1 >= 0 && cfg.beta1 < 1) || !(cfg.beta2 >= 0 && cfg.beta2 < 1)) {
        throw ConfigError("training: adam betas must lie in [0,1)");
    }
    if (cfg.adam_eps <= 0) throw ConfigError("training: adam_eps must be > 0");
}

// Half-cosine decay at epoch granularity, no restarts, floor 0.
inline double cosine_lr(int epoch, int total_epochs, double base_lr) {
    if (total_epochs < 1 || epoch < 0 || epoch >= total_epochs) {
        throw ValueError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0," +
                         std::to_string(total_epochs) + ")");
    }
    return 0.5 * base_lr *
           (1.0 + std::cos(M_PI * static_cast<double>(epoch) / total_epochs));
}

// Adam with bias correction and decoupled weight decay. Parameters whose
// requires_grad flag is off (frozen groups) are skipped entirely: no moment
// update, no decay, bitwise untouched.
template <class S>
class Adam {
  public:
    Adam(ParamList<S> params, const TrainConfig& cfg)
        : params_(std::move(params)),
          beta1_(cfg.beta1),
          beta2_(cfg.beta2),
          eps_(cfg.adam_eps),
          weight_decay_(cfg.weight_decay) {
        slots_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const std::size_t n = params_[i].second.numel();
            slots_[i].m.assign(n, S(0));
            slots_[i].v.assign(n, S(0));
        }
    }

    void zero_grad() {
        for (auto& [name, p] : params_) {
            if (p.requires_grad()) p.zero_grad();
        }
    }

    void step(double lr_t) {
        ++t_;
        const S c1 = S(1) - std::pow(S(beta1_), S(t_));
        const S c2 = S(1) - std::pow(S(beta2_), S(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Tensor<S>& p = params_[i].second;
            if (!p.requires_grad()) continue;
            auto& m = slots_[i].m;
            auto& v = slots_[i].v;
            const auto& g = p.grad();
            auto& theta = p.data();
            for (std::size_t j = 0; j < theta.size(); ++j) {
                m[j] = S(beta1_) * m[j] + (S(1) - S(beta1_)) * g[j];
                v[j] = S(beta2_) * v[j] + (S(1) - S(beta2_)) * g[j] * g[j];
                const S mhat = m[j] / c1;
                const S vhat = v[j] / c2;
                theta[j] -= S(lr_t) * (mhat / (std::sqrt(vhat) + S(eps_)) +
                                       S(weight_decay_) * theta[j]);
            }
        }
    }

    long steps() const { return t_; }

  private:
    struct Slot {
        std::vector<S> m, v;
    };
    ParamList<S> params_;
    std::vector<Slot> slots_;
    double beta1_, beta2_, eps_, weight_decay_;
    long t_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoints: versioned native-endian binary container of named tensors
// (values stored as double regardless of the model scalar) plus an
// architecture fingerprint. Loading validates the fingerprint, the exact name
// set, and every shape.

inline std::uint64_t config_fingerprint(const std::string& text) {
    std::uint64_t h = 0x6b7a2c3d4e5f6071ull;
    for (const unsigned char c : text) h = mix64(h ^ c);
    return h;
}

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw LoadError("checkpoint: truncated file");
    return v;
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw LoadError("checkpoint: truncated file");
    return v;
}

}  // namespace detail

inline constexpr std::uint32_t kCheckpointMagic = 0x4b435447u;  // "GTCK"
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class S>
void save_checkpoint(const std::string& path, const ParamList<S>& params,
                     std::uint64_t fingerprint) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw LoadError("cannot open " + path);
    detail::write_u32(os, kCheckpointMagic);
    detail::write_u32(os, kCheckpointVersion);
    detail::write_u64(os, fingerprint);
    detail::write_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        detail::write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_u32(os, static_cast<std::uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) {
            detail::write_u32(os, static_cast<std::uint32_t>(t.dim(i)));
        }
        for (const S v : t.data()) {
            const double d = static_cast<double>(v);
            os.write(reinterpret_cast<const char*>(&d), sizeof(d));
        }
    }
    if (!os) throw LoadError("checkpoint: write failed for " + path);
}

// The file must contain exactly the requested tensors (matched by name), each
// with the expected shape; values are copied into the existing buffers.
template <class S>
void load_checkpoint(const std::string& path, ParamList<S>& params,
                     std::uint64_t expected_fingerprint) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("cannot open " + path);
    if (detail::read_u32(is) != kCheckpointMagic) {
        throw LoadError("checkpoint: bad magic in " + path);
    }
    if (detail::read_u32(is) != kCheckpointVersion) {
        throw LoadError("checkpoint: unsupported version in " + path);
    }
    const std::uint64_t fp = detail::read_u64(is);
    if (fp != expected_fingerprint) {
        throw LoadError("checkpoint: fingerprint mismatch in " + path);
    }
    const std::uint32_t count = detail::read_u32(is);

    std::map<std::string, std::pair<Shape, std::vector<double>>> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = detail::read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t rank = detail::read_u32(is);
        Shape shape;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape.push_back(static_cast<int>(detail::read_u32(is)));
        }
        std::vector<double> values(shape_numel(shape));
        is.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(values.size() * sizeof(double)));
        if (!is) throw LoadError("checkpoint: truncated file");
        entries.emplace(std::move(name), std::make_pair(std::move(shape), std::move(values)));
    }

    if (entries.size() != params.size()) {
        throw LoadError("checkpoint: holds " + std::to_string(entries.size()) +
                        " tensors, expected " + std::to_string(params.size()));
    }
    for (auto& [name, t] : params) {
        auto it = entries.find(name);
        if (it == entries.end()) {
            throw LoadError("checkpoint: missing tensor " + name);
        }
        if (it->second.first != t.shape()) {
            throw LoadError("checkpoint: shape mismatch for " + name + ": file " +
                            shape_str(it->second.first) + ", model " + shape_str(t.shape()));
        }
        auto& dst = t.data();
        const auto& src = it->second.second;
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<S>(src[j]);
    }
}

inline std::string gnn_arch_string(const GnnConfig& cfg, int num_node_label_values) {
    return std::string(gnn_type_name(cfg.gnn_type)) + "|layers=" +
           std::to_string(cfg.num_layers) + "|hidden=" + std::to_string(cfg.hidden_dim) +
           "|vn=" + (cfg.use_virtual_node ? "1" : "0") +
           "|labels=" + std::to_string(num_node_label_values);
}

inline std::string gnn_only_arch_string(const GnnConfig& cfg, int num_node_label_values,
                                        int num_classes) {
    return gnn_arch_string(cfg, num_node_label_values) + "|head=" +
           std::to_string(num_classes);
}

inline std::string model_arch_string(const GnnConfig& gcfg, const TransformerConfig& tcfg,
                                     int num_node_label_values, int num_classes) {
    std::string sched;
    for (int n : tcfg.mask_schedule) sched += std::to_string(n) + ",";
    return gnn_arch_string(gcfg, num_node_label_values) + "||dtf=" +
           std::to_string(tcfg.d_tf) + "|ffn=" + std::to_string(tcfg.ffn_dim) +
           "|layers=" + std::to_string(tcfg.num_layers) +
           "|heads=" + std::to_string(tcfg.num_heads) +
           "|readout=" + readout_name(tcfg.readout) + "|sched=" + sched +
           "|classes=" + std::to_string(num_classes);
}

// ---------------------------------------------------------------------------
// GNN-only pretraining model: gnn stack, mean pool over real nodes, linear head.

template <class S>
struct GnnOnlyParams {
    GnnParams<S> gnn;
    Tensor<S> w_out;  // [hidden_dim, num_classes]

    void collect(ParamList<S>& out) const {
        gnn.collect(out);
        out.emplace_back("gnn_head.w", w_out);
    }
};

template <class S>
GnnOnlyParams<S> init_gnn_only_params(const GnnConfig& cfg, int num_node_label_values,
                                      int num_classes, Rng& rng) {
    GnnOnlyParams<S> p;
    p.gnn = init_gnn_params<S>(cfg, num_node_label_values, rng);
    p.w_out = glorot_uniform<S>(cfg.hidden_dim, num_classes,
                                {cfg.hidden_dim, num_classes}, rng);
    return p;
}

template <class S>
Tensor<S> gnn_only_logits(const Batch<S>& batch, const GnnConfig& cfg,
                          const GnnOnlyParams<S>& params, bool training = false,
                          CounterRng* rng = nullptr) {
    auto h = gnn_forward(batch, cfg, params.gnn, training, rng);
    auto pooled = masked_mean_tokens(h, batch.padding_mask);
    return matmul(pooled, params.w_out);
}

// ---------------------------------------------------------------------------
// Evaluation: argmax accuracy (ties resolved to the lowest class index),
// computed batch-wise with dropout off; pure in the model parameters.

template <class S>
double evaluate_logits(const Dataset& split, int batch_size, GnnType gnn_type,
                       const std::function<Tensor<S>(const Batch<S>&)>& logits_fn) {
    if (split.graphs.empty()) throw ValueError("evaluate: empty split");
    const int n = static_cast<int>(split.graphs.size());
    int correct = 0;
    for (int start = 0; start < n; start += batch_size) {
        const int stop = std::min(n, start + batch_size);
        std::vector<Graph> chunk(split.graphs.begin() + start, split.graphs.begin() + stop);
        auto batch = make_batch<S>(chunk, gnn_type, split.num_node_label_values);
        auto logits = logits_fn(batch);
        const int classes = logits.dim(1);
        for (int i = 0; i < stop - start; ++i) {
            int arg = 0;
            const S* row = logits.ptr() + static_cast<std::size_t>(i) * classes;
            for (int c = 1; c < classes; ++c) {
                if (row[c] > row[arg]) arg = c;
            }
            if (arg == batch.labels[static_cast<std::size_t>(i)]) ++correct;
        }
    }
    return static_cast<double>(correct) / n;
}

template <class S>
double evaluate(const Dataset& split, const GnnConfig& gcfg, const TransformerConfig& tcfg,
                const GraphTransParams<S>& params, int batch_size) {
    return evaluate_logits<S>(split, batch_size, gcfg.gnn_type,
                              [&](const Batch<S>& b) {
                                  return graphtrans_forward(b, gcfg, tcfg, params).logits;
                              });
}

// ---------------------------------------------------------------------------
// Training.

struct RunResult {
    std::vector<double> lr;          // per epoch
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_acc;     // per epoch
    std::vector<double> test_acc;    // per epoch
    int best_epoch = 0;
    double best_val_acc = 0.0;
    double test_at_best = 0.0;
    double forward_ms = 0.0;   // mean per iteration
    double backward_ms = 0.0;  // mean per iteration
};

inline std::string format_double(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

inline void write_metrics_csv(const RunResult& r, std::ostream& os) {
    os << "# schema: metrics/v1\n";
    os << "epoch,lr,train_loss,val_acc,test_acc\n";
    for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
        os << e << ',' << format_double(r.lr[e]) << ',' << format_double(r.train_loss[e])
           << ',' << format_double(r.val_acc[e]) << ',' << format_double(r.test_acc[e])
           << '\n';
    }
}

enum class TrainMode { FULL, GNN_ONLY };

template <class S>
struct TrainOutput {
    RunResult result;
    GraphTransParams<S> params;  // populated in FULL mode
    GnnOnlyParams<S> gnn_only;   // populated in GNN_ONLY mode
};

// Epoch loop with shuffled minibatches; per-epoch validation/test accuracy;
// the reported model is the one at the best-validation epoch (earliest on
// ties), though parameters themselves are returned from the final epoch.
// Modes: FULL trains the whole pipeline (optionally loading and/or freezing a
// pretrained gnn); GNN_ONLY trains the mean-pool-head gnn classifier whose
// checkpoint seeds the two-phase protocol.
template <class S>
TrainOutput<S> train(const SplitResult& splits, const GnnConfig& gcfg_in,
                     const TransformerConfig& tcfg, const TrainConfig& tc, TrainMode mode,
                     std::uint64_t seed,
                     const std::function<void(int, const RunResult&)>& on_epoch = {}) {
    validate_train_config(tc);
    validate_gnn_config(gcfg_in);
    if (mode == TrainMode::FULL) validate_transformer_config(tcfg);
    const Dataset& train_set = splits.train;
    if (train_set.graphs.empty()) throw ValueError("train: empty training split");

    GnnConfig gcfg = gcfg_in;
    // a frozen gnn is a fixed feature extractor: its dropout stays off
    if (tc.freeze_gnn && mode == TrainMode::FULL) gcfg.dropout = 0.0;

    Rng init_rng(derive_seed(seed, 1));
    Rng shuffle_rng(derive_seed(seed, 2));
    CounterRng dropout_rng(derive_seed(seed, 3));

    TrainOutput<S> out;
    ParamList<S> plist;
    std::function<Tensor<S>(const Batch<S>&, bool)> logits_fn;

    if (mode == TrainMode::FULL) {
        out.params = init_graphtrans_params<S>(gcfg, tcfg, train_set.num_node_label_values,
                                               train_set.num_classes, init_rng);
        if (!tc.pretrained_gnn.empty()) {
            ParamList<S> gnn_list;
            out.params.gnn.collect(gnn_list);
            load_checkpoint(tc.pretrained_gnn, gnn_list,
                            config_fingerprint(gnn_arch_string(
                                gcfg, train_set.num_node_label_values)));
        }
        if (tc.freeze_gnn) {
            ParamList<S> gnn_list;
            out.params.gnn.collect(gnn_list);
            for (auto& [name, p] : gnn_list) p.set_requires_grad(false);
        }
        out.params.collect(plist);
        logits_fn = [&out, &gcfg, &tcfg, &dropout_rng](const Batch<S>& b, bool training) {
            return graphtrans_forward(b, gcfg, tcfg, out.params, training,
                                      training ? &dropout_rng : nullptr)
                .logits;
        };
    } else {
        out.gnn_only = init_gnn_only_params<S>(gcfg, train_set.num_node_label_values,
                                               train_set.num_classes, init_rng);
        out.gnn_only.collect(plist);
        logits_fn = [&out, &gcfg, &dropout_rng](const Batch<S>& b, bool training) {
            return gnn_only_logits(b, gcfg, out.gnn_only, training,
                                   training ? &dropout_rng : nullptr);
        };
    }

    Adam<S> opt(plist, tc);
    RunResult& r = out.result;

    const int n_train = static_cast<int>(train_set.graphs.size());
    std::vector<int> order(static_cast<std::size_t>(n_train));
    for (int i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = i;

    double fw_total = 0.0, bw_total = 0.0;
    long iterations = 0;
    using clock = std::chrono::steady_clock;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const double lr_t =
            tc.cosine_anneal ? cosine_lr(epoch, tc.epochs, tc.lr) : tc.lr;
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        for (int start = 0; start < n_train; start += tc.batch_size) {
            const int stop = std::min(n_train, start + tc.batch_size);
            std::vector<Graph> chunk;
            chunk.reserve(static_cast<std::size_t>(stop - start));
            for (int i = start; i < stop; ++i) {
                chunk.push_back(
                    train_set.graphs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
            }
            auto batch = make_batch<S>(chunk, gcfg.gnn_type, train_set.num_node_label_values);

            Tape<S> tape;
            typename Tape<S>::Scope scope(tape);
            opt.zero_grad();

            const auto t0 = clock::now();
            auto logits = logits_fn(batch, true);
            auto loss = cross_entropy(logits, batch.labels);
            const auto t1 = clock::now();
            tape.backward(loss);
            const auto t2 = clock::now();
            opt.step(lr_t);

            fw_total += std::chrono::duration<double, std::milli>(t1 - t0).count();
            bw_total += std::chrono::duration<double, std::milli>(t2 - t1).count();
            ++iterations;
            loss_sum += static_cast<double>(loss.value()) * (stop - start);
        }

        const double val = evaluate_logits<S>(
            splits.valid, tc.batch_size, gcfg.gnn_type,
            [&](const Batch<S>& b) { return logits_fn(b, false); });
        const double test = evaluate_logits<S>(
            splits.test, tc.batch_size, gcfg.gnn_type,
            [&](const Batch<S>& b) { return logits_fn(b, false); });

        r.lr.push_back(lr_t);
        r.train_loss.push_back(loss_sum / n_train);
        r.val_acc.push_back(val);
        r.test_acc.push_back(test);
        if (epoch == 0 || val > r.best_val_acc) {
            r.best_val_acc = val;
            r.best_epoch = epoch;
            r.test_at_best = test;
        }
        if (on_epoch) on_epoch(epoch, r);
    }
    if (iterations > 0) {
        r.forward_ms = fw_total / static_cast<double>(iterations);
        r.backward_ms = bw_total / static_cast<double>(iterations);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scalability profiler: Erdős–Rényi fixtures, warm-up plus timed train
// iterations per (nodes, density) cell, forward/backward split.

struct ProfileOptions {
    int warmup = 5;
    int timed = 20;
    int num_node_label_values = 2;
    int num_classes = 2;
};

struct ProfileCell {
    int nodes = 0;
    double density = 0.0;
    bool oom = false;
    double forward_mean_ms = 0.0, forward_std_ms = 0.0;
    double backward_mean_ms = 0.0, backward_std_ms = 0.0;
    double iter_mean_ms = 0.0, iter_std_ms = 0.0;
};

// The profiled fixture for one cell: a single labeled graph, deterministic in
// (nodes, density, seed).
inline Graph profile_graph(int nodes, double density, std::uint64_t seed,
                           int num_node_label_values, int num_classes, int* label_out) {
    Graph g = erdos_renyi(nodes, density, derive_seed(seed, 10));
    Rng rng(derive_seed(seed, 11));
    for (auto& l : g.node_labels) l = rng.uniform_int(num_node_label_values);
    g.label = rng.uniform_int(num_classes);
    if (label_out != nullptr) *label_out = g.label;
    return g;
}

namespace detail {

inline void mean_std(const std::vector<double>& xs, double& mean, double& stddev) {
    mean = 0.0;
    for (const double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (const double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    stddev = std::sqrt(var);
}

}  // namespace detail

template <class S>
std::vector<ProfileCell> profile(const std::vector<int>& node_counts,
                                 const std::vector<double>& densities,
                                 const GnnConfig& gcfg, const TransformerConfig& tcfg,
                                 std::uint64_t seed, const ProfileOptions& opts = {}) {
    validate_gnn_config(gcfg);
    validate_transformer_config(tcfg);
    std::vector<ProfileCell> cells;
    using clock = std::chrono::steady_clock;

    for (const double density : densities) {
        for (const int nodes : node_counts) {
            ProfileCell cell;
            cell.nodes = nodes;
            cell.density = density;
            try {
                const std::uint64_t cell_seed =
                    derive_seed(seed, (static_cast<std::uint64_t>(nodes) << 20) ^
                                          static_cast<std::uint64_t>(density * 1e6));
                Graph g = profile_graph(nodes, density, cell_seed,
                                        opts.num_node_label_values, opts.num_classes,
                                        nullptr);
                Rng init_rng(derive_seed(cell_seed, 1));
                auto params = init_graphtrans_params<S>(
                    gcfg, tcfg, opts.num_node_label_values, opts.num_classes, init_rng);
                auto batch = make_batch<S>({g}, gcfg.gnn_type, opts.num_node_label_values);

                std::vector<double> fw, bw;
                for (int it = 0; it < opts.warmup + opts.timed; ++it) {
                    Tape<S> tape;
                    typename Tape<S>::Scope scope(tape);
                    const auto t0 = clock::now();
                    auto logits = graphtrans_forward(batch, gcfg, tcfg, params).logits;
                    auto loss = cross_entropy(logits, batch.labels);
                    const auto t1 = clock::now();
                    tape.backward(loss);
                    const auto t2 = clock::now();
                    if (it >= opts.warmup) {
                        fw.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
                        bw.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
                    }
                }
                detail::mean_std(fw, cell.forward_mean_ms, cell.forward_std_ms);
                detail::mean_std(bw, cell.backward_mean_ms, cell.backward_std_ms);
                std::vector<double> iter(fw.size());
                for (std::size_t i = 0; i < fw.size(); ++i) iter[i] = fw[i] + bw[i];
                detail::mean_std(iter, cell.iter_mean_ms, cell.iter_std_ms);
            } catch (const std::bad_alloc&) {
                cell.oom = true;
            }
            cells.push_back(cell);
        }
    }
    return cells;
}

inline void write_profile_csv(const std::vector<ProfileCell>& cells, std::ostream& os) {
    os << "# schema: profile/v1\n";
    os << "nodes,density,forward_ms_mean,forward_ms_std,backward_ms_mean,backward_ms_std,"
          "iter_ms_mean,iter_ms_std,status\n";
    for (const auto& c : cells) {
        os << c.nodes << ',' << format_double(c.density) << ',';
        if (c.oom) {
            os << ",,,,,,OOM\n";
        } else {
            os << format_double(c.forward_mean_ms) << ',' << format_double(c.forward_std_ms)
               << ',' << format_double(c.backward_mean_ms) << ','
               << format_double(c.backward_std_ms) << ',' << format_double(c.iter_mean_ms)
               << ',' << format_double(c.iter_std_ms) << ",ok\n";
        }
    }
}

}  // namespace graphtrans
