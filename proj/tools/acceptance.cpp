#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "graphtrans/config.hpp"
#include "graphtrans/gradcheck_suite.hpp"
#include "graphtrans/tu_io.hpp"

using namespace graphtrans;

namespace {

struct Verdict {
    enum Status { PASS, FAIL, BLOCKED } status = PASS;
    std::string detail;
};

Verdict pass(std::string d) { return {Verdict::PASS, std::move(d)}; }
Verdict fail(std::string d) { return {Verdict::FAIL, std::move(d)}; }
Verdict blocked(std::string d) { return {Verdict::BLOCKED, std::move(d)}; }

std::string fmt(double v) { return format_double(v); }

double mean_of(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::string join_accs(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i > 0) out += '/';
        out += fmt(xs[i]);
    }
    return out;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- fixtures

Graph random_labeled(int n, double density, std::uint64_t seed, int label_values) {
    Graph g = erdos_renyi(n, density, seed);
    Rng rng(derive_seed(seed, 1));
    for (auto& l : g.node_labels) l = rng.uniform_int(label_values);
    g.label = rng.uniform_int(2);
    return g;
}

// spanning tree plus extra random edges: connected by construction
Graph random_connected(int n, double extra, Rng& rng, int label_values) {
    Graph g;
    g.num_nodes = n;
    std::set<std::pair<int, int>> edges;
    for (int v = 1; v < n; ++v) {
        const int u = rng.uniform_int(v);
        edges.insert({std::min(u, v), std::max(u, v)});
    }
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            if (rng.uniform() < extra) edges.insert({u, v});
        }
    }
    g.edges.assign(edges.begin(), edges.end());
    g.node_labels.resize(static_cast<std::size_t>(n));
    for (auto& l : g.node_labels) l = rng.uniform_int(label_values);
    g.label = rng.uniform_int(2);
    return g;
}

int graph_diameter(const Graph& g) {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(g.num_nodes));
    for (const auto& [u, v] : g.edges) {
        adj[static_cast<std::size_t>(u)].push_back(v);
        adj[static_cast<std::size_t>(v)].push_back(u);
    }
    int diam = 0;
    for (int s = 0; s < g.num_nodes; ++s) {
        std::vector<int> dist(static_cast<std::size_t>(g.num_nodes), -1);
        std::queue<int> q;
        q.push(s);
        dist[static_cast<std::size_t>(s)] = 0;
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (const int v : adj[static_cast<std::size_t>(u)]) {
                if (dist[static_cast<std::size_t>(v)] < 0) {
                    dist[static_cast<std::size_t>(v)] =
                        dist[static_cast<std::size_t>(u)] + 1;
                    q.push(v);
                }
            }
        }
        for (const int d : dist) diam = std::max(diam, d);
    }
    return diam;
}

// ------------------------------------------------- scalar layer oracle (c3)

struct OracleLayer {
    std::vector<double> wq, bq, wk, bk, wv, bv, wmix, bmix;
    std::vector<double> fc1_w, fc1_b, fc2_w, fc2_b;
    std::vector<double> ln1_g, ln1_b, ln2_g, ln2_b;
};

std::vector<double> oracle_layer_forward(const std::vector<double>& x, int B, int S, int D,
                                         int H, int F,
                                         const std::vector<std::uint8_t>& keep,
                                         const OracleLayer& p) {
    const int dh = D / H;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    auto lin = [&](const std::vector<double>& in, const std::vector<double>& w,
                   const std::vector<double>& b, int din, int dout) {
        std::vector<double> out(static_cast<std::size_t>(B) * S * dout, 0.0);
        for (int bi = 0; bi < B; ++bi) {
            for (int i = 0; i < S; ++i) {
                for (int d = 0; d < dout; ++d) {
                    double acc = b[static_cast<std::size_t>(d)];
                    for (int kk = 0; kk < din; ++kk) {
                        acc += in[(static_cast<std::size_t>(bi) * S + i) * din + kk] *
                               w[static_cast<std::size_t>(kk) * dout + d];
                    }
                    out[(static_cast<std::size_t>(bi) * S + i) * dout + d] = acc;
                }
            }
        }
        return out;
    };
    auto layer_norm_ref = [&](std::vector<double>& v, const std::vector<double>& gain,
                              const std::vector<double>& bias) {
        for (int bi = 0; bi < B; ++bi) {
            for (int i = 0; i < S; ++i) {
                double mean = 0.0;
                for (int d = 0; d < D; ++d) {
                    mean += v[(static_cast<std::size_t>(bi) * S + i) * D + d];
                }
                mean /= D;
                double var = 0.0;
                for (int d = 0; d < D; ++d) {
                    const double c =
                        v[(static_cast<std::size_t>(bi) * S + i) * D + d] - mean;
                    var += c * c;
                }
                var /= D;
                const double denom = std::sqrt(var + kLayerNormEps);
                for (int d = 0; d < D; ++d) {
                    auto& e = v[(static_cast<std::size_t>(bi) * S + i) * D + d];
                    e = (e - mean) / denom * gain[static_cast<std::size_t>(d)] +
                        bias[static_cast<std::size_t>(d)];
                }
            }
        }
    };

    auto q = lin(x, p.wq, p.bq, D, D);
    auto k = lin(x, p.wk, p.bk, D, D);
    auto v = lin(x, p.wv, p.bv, D, D);
    std::vector<double> ctx(static_cast<std::size_t>(B) * S * D, 0.0);
    for (int bi = 0; bi < B; ++bi) {
        for (int h = 0; h < H; ++h) {
            for (int i = 0; i < S; ++i) {
                std::vector<double> scores(static_cast<std::size_t>(S), 0.0);
                double best = -1e300;
                for (int j = 0; j < S; ++j) {
                    if (!keep[static_cast<std::size_t>(bi) * S + j]) continue;
                    double s = 0.0;
                    for (int d = 0; d < dh; ++d) {
                        s += q[(static_cast<std::size_t>(bi) * S + i) * D + h * dh + d] *
                             k[(static_cast<std::size_t>(bi) * S + j) * D + h * dh + d];
                    }
                    scores[static_cast<std::size_t>(j)] = s * inv_scale;
                    best = std::max(best, scores[static_cast<std::size_t>(j)]);
                }
                double z = 0.0;
                std::vector<double> alpha(static_cast<std::size_t>(S), 0.0);
                for (int j = 0; j < S; ++j) {
                    if (!keep[static_cast<std::size_t>(bi) * S + j]) continue;
                    alpha[static_cast<std::size_t>(j)] =
                        std::exp(scores[static_cast<std::size_t>(j)] - best);
                    z += alpha[static_cast<std::size_t>(j)];
                }
                for (int j = 0; j < S; ++j) {
                    if (!keep[static_cast<std::size_t>(bi) * S + j]) continue;
                    const double a = alpha[static_cast<std::size_t>(j)] / z;
                    for (int d = 0; d < dh; ++d) {
                        ctx[(static_cast<std::size_t>(bi) * S + i) * D + h * dh + d] +=
                            a * v[(static_cast<std::size_t>(bi) * S + j) * D + h * dh + d];
                    }
                }
            }
        }
    }
    auto attn = lin(ctx, p.wmix, p.bmix, D, D);
    std::vector<double> res1(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) res1[i] = x[i] + attn[i];
    layer_norm_ref(res1, p.ln1_g, p.ln1_b);

    auto hidden = lin(res1, p.fc1_w, p.fc1_b, D, F);
    for (auto& e : hidden) e = std::max(0.0, e);
    auto ffn = lin(hidden, p.fc2_w, p.fc2_b, F, D);
    std::vector<double> res2(res1.size());
    for (std::size_t i = 0; i < res1.size(); ++i) res2[i] = res1[i] + ffn[i];
    layer_norm_ref(res2, p.ln2_g, p.ln2_b);
    return res2;
}

// ----------------------------------------------------------- criteria 1-4

Verdict criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_op = 0.0;
    std::string worst_name;
    for (const auto& check : run_op_gradchecks()) {
        if (check.max_rel_err > worst_op) {
            worst_op = check.max_rel_err;
            worst_name = check.name;
        }
        if (check.max_rel_err >= 1e-5) {
            return fail("op " + check.name + " max rel err " + fmt(check.max_rel_err) +
                        " >= 1e-5");
        }
    }
    const auto model = run_model_gradcheck();
    const double secs = elapsed_s(t0);
    if (model.max_rel_err >= 1e-4) {
        return fail("full model max rel err " + fmt(model.max_rel_err) +
                    " >= 1e-4 (worst " + model.worst_param + ")");
    }
    if (secs >= 60.0) return fail("runtime " + fmt(secs) + "s >= 60s");
    return pass("worst op " + worst_name + " " + fmt(worst_op) + ", full model " +
                fmt(model.max_rel_err) + ", " + fmt(secs) + "s");
}

Verdict criterion_permutation() {
    const auto t0 = std::chrono::steady_clock::now();
    GnnConfig gcfg;          // gcn, 3 layers, hidden 128
    TransformerConfig tcfg;  // 4 layers, d 128, 4 heads, cls
    Rng init_rng(101);
    auto params = init_graphtrans_params<float>(gcfg, tcfg, 5, 2, init_rng);

    Rng rng(202);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const int n = 2 + rng.uniform_int(29);
        auto g = random_labeled(n, rng.uniform(0.15, 0.7), rng.u64(), 5);
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        auto pg = permute_graph(g, perm);

        auto ba = make_batch<float>({g}, gcfg.gnn_type, 5);
        auto bb = make_batch<float>({pg}, gcfg.gnn_type, 5);
        auto pa = graphtrans_forward(ba, gcfg, tcfg, params).probs;
        auto pb = graphtrans_forward(bb, gcfg, tcfg, params).probs;
        for (std::size_t j = 0; j < pa.numel(); ++j) {
            worst = std::max(
                worst, static_cast<double>(std::abs(pa.data()[j] - pb.data()[j])));
        }
    }
    const double secs = elapsed_s(t0);
    if (worst >= 1e-4) return fail("max prediction shift " + fmt(worst) + " >= 1e-4");
    if (secs >= 60.0) return fail("runtime " + fmt(secs) + "s >= 60s");
    return pass("max prediction shift " + fmt(worst) + " over 100 graphs, " + fmt(secs) +
                "s");
}

Verdict criterion_attention_oracle() {
    Rng rng(303);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const int B = 2, D = 8, F = 10;
        const int S = 3 + rng.uniform_int(4);
        const int H = rng.uniform() < 0.5 ? 2 : 4;

        std::vector<double> xv(static_cast<std::size_t>(B) * S * D);
        for (auto& e : xv) e = rng.uniform(-1.5, 1.5);
        Tensor<double> x({B, S, D}, xv);

        BoolTensor key_mask({B, 1, 1, S}, 1);
        std::vector<std::uint8_t> keep(static_cast<std::size_t>(B) * S, 1);
        for (int bi = 0; bi < B; ++bi) {
            const int real = 1 + rng.uniform_int(S);
            for (int j = real; j < S; ++j) {
                key_mask.v[static_cast<std::size_t>(bi) * S + j] = 0;
                keep[static_cast<std::size_t>(bi) * S + j] = 0;
            }
        }

        TransformerLayerParams<double> lp;
        auto fc = [&rng](int in, int outd) {
            return glorot_uniform<double>(in, outd, {in, outd}, rng);
        };
        auto vec = [&rng](int d) { return normal_init<double>({d}, 0.2, rng); };
        lp.wq = fc(D, D), lp.bq = vec(D);
        lp.wk = fc(D, D), lp.bk = vec(D);
        lp.wv = fc(D, D), lp.bv = vec(D);
        lp.wmix = fc(D, D), lp.bmix = vec(D);
        lp.fc1_w = fc(D, F), lp.fc1_b = vec(F);
        lp.fc2_w = fc(F, D), lp.fc2_b = vec(D);
        lp.ln1.gain = normal_init<double>({D}, 0.1, rng), lp.ln1.bias = vec(D);
        lp.ln2.gain = normal_init<double>({D}, 0.1, rng), lp.ln2.bias = vec(D);
        for (auto& e : lp.ln1.gain.data()) e += 1.0;
        for (auto& e : lp.ln2.gain.data()) e += 1.0;

        OracleLayer op{lp.wq.data(),    lp.bq.data(),    lp.wk.data(),    lp.bk.data(),
                       lp.wv.data(),    lp.bv.data(),    lp.wmix.data(),  lp.bmix.data(),
                       lp.fc1_w.data(), lp.fc1_b.data(), lp.fc2_w.data(), lp.fc2_b.data(),
                       lp.ln1.gain.data(), lp.ln1.bias.data(), lp.ln2.gain.data(),
                       lp.ln2.bias.data()};

        auto out = attention_layer<double>(x, key_mask, nullptr, lp, H);
        auto ref = oracle_layer_forward(xv, B, S, D, H, F, keep, op);
        for (int bi = 0; bi < B; ++bi) {
            for (int i = 0; i < S; ++i) {
                if (!keep[static_cast<std::size_t>(bi) * S + i]) continue;
                for (int d = 0; d < D; ++d) {
                    const std::size_t idx =
                        (static_cast<std::size_t>(bi) * S + i) * D + d;
                    worst = std::max(worst, std::abs(out.data()[idx] - ref[idx]));
                }
            }
        }
    }
    if (worst >= 1e-6) return fail("max deviation from scalar oracle " + fmt(worst));
    return pass("max deviation from scalar oracle " + fmt(worst) + " over 50 inputs");
}

Verdict criterion_mask_saturation() {
    Rng rng(404);
    GnnConfig gcfg;
    gcfg.num_layers = 0;
    gcfg.hidden_dim = 8;
    TransformerConfig dense_cfg;
    dense_cfg.d_tf = 8;
    dense_cfg.ffn_dim = 16;
    dense_cfg.num_layers = 2;
    dense_cfg.num_heads = 2;

    double worst_eq = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 4 + rng.uniform_int(7);
        auto g = random_connected(n, 0.25, rng, 3);
        const int diam = graph_diameter(g);

        Rng init_rng(derive_seed(405, static_cast<std::uint64_t>(rep)));
        auto params = init_graphtrans_params<double>(gcfg, dense_cfg, 3, 2, init_rng);
        auto batch = make_batch<double>({g}, gcfg.gnn_type, 3);

        auto dense_logits = graphtrans_forward(batch, gcfg, dense_cfg, params).logits;
        TransformerConfig hop_cfg = dense_cfg;
        hop_cfg.mask_schedule = {diam, diam};
        auto hop_logits = graphtrans_forward(batch, gcfg, hop_cfg, params).logits;
        for (std::size_t j = 0; j < dense_logits.numel(); ++j) {
            worst_eq = std::max(worst_eq,
                                std::abs(dense_logits.data()[j] - hop_logits.data()[j]));
        }

        TransformerConfig one_cfg = dense_cfg;
        one_cfg.mask_schedule = {1, 1};
        auto fwd = graphtrans_forward(batch, gcfg, one_cfg, params, false, nullptr, true);
        std::set<std::pair<int, int>> adjacent(g.edges.begin(), g.edges.end());
        auto allowed = [&](int i, int j) {
            if (i == 0 || j == 0 || i == j) return true;  // cls row/col, self
            const int u = std::min(i, j) - 1, v = std::max(i, j) - 1;
            return adjacent.count({u, v}) > 0;
        };
        for (const auto& m : fwd.attention) {
            for (int i = 0; i < m.size; ++i) {
                for (int j = 0; j < m.size; ++j) {
                    const double a = m.alpha[static_cast<std::size_t>(i) * m.size + j];
                    if (!allowed(i, j) && a != 0.0) {
                        return fail("hop(1) leak: graph " + std::to_string(rep) +
                                    " layer " + std::to_string(m.layer) + " alpha[" +
                                    std::to_string(i) + "][" + std::to_string(j) +
                                    "] = " + fmt(a));
                    }
                }
            }
        }
    }
    if (worst_eq >= 1e-5) {
        return fail("hop(diameter) vs dense max deviation " + fmt(worst_eq) + " >= 1e-5");
    }
    return pass("hop(diameter) equals dense within " + fmt(worst_eq) +
                "; hop(1) weights exactly 0 outside 1-hop + cls, 50 graphs");
}

// --------------------------------------------------------- nci runs (5-8)

struct NciCache {
    std::string dataset_dir;
    std::string configs_dir;
    bool tried = false;
    bool ok = false;
    std::string reason;
    Dataset ds;
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    std::map<std::string, std::vector<double>> accs;
};

bool ensure_nci(NciCache& c) {
    if (c.tried) return c.ok;
    c.tried = true;
    const std::string dir = c.dataset_dir + "/NCI1";
    try {
        c.ds = load_tu_dataset(dir, "NCI1");
        c.ok = true;
    } catch (const std::exception& e) {
        c.ok = false;
        c.reason = std::string("NCI1 unavailable (") + e.what() + "); download " +
                   "https://www.chrsmrrs.com/graphkerneldatasets/NCI1.zip and extract " +
                   "into " + c.dataset_dir;
    }
    return c.ok;
}

std::vector<double> run_seeds(NciCache& c, const RunConfig& cfg,
                              const std::string& cache_key) {
    auto it = c.accs.find(cache_key);
    if (it != c.accs.end()) return it->second;
    std::vector<double> accs;
    for (const auto seed : c.seeds) {
        auto splits = split(c.ds, cfg.split_train, cfg.split_valid, derive_seed(seed, 4));
        auto out = train<float>(splits, cfg.gnn, cfg.tf, cfg.training, cfg.mode, seed);
        accs.push_back(out.result.test_at_best);
        std::cout << "  [" << cache_key << "] seed " << seed << ": test "
                  << fmt(out.result.test_at_best) << "\n";
    }
    c.accs[cache_key] = accs;
    return accs;
}

RunConfig load_preset(const NciCache& c, const std::string& name) {
    RunConfig cfg = load_config_file(c.configs_dir + "/" + name);
    validate_run_config(cfg);
    return cfg;
}

Verdict criterion_nci_small(NciCache& c) {
    if (!ensure_nci(c)) return blocked(c.reason);
    auto accs = run_seeds(c, load_preset(c, "nci-small.cfg"), "nci-small");
    const double mean = mean_of(accs);
    if (mean < 0.75) return fail("mean test accuracy " + fmt(mean) + " < 0.75");
    return pass("mean test accuracy " + fmt(mean) + " (" + join_accs(accs) + ")");
}

Verdict criterion_vs_transformer_only(NciCache& c) {
    if (!ensure_nci(c)) return blocked(c.reason);
    const double small = mean_of(run_seeds(c, load_preset(c, "nci-small.cfg"), "nci-small"));
    const double tf_only = mean_of(
        run_seeds(c, load_preset(c, "transformer-only.cfg"), "transformer-only"));
    if (small - tf_only < 0.05) {
        return fail("gap " + fmt(small - tf_only) + " < 0.05 (small " + fmt(small) +
                    ", transformer-only " + fmt(tf_only) + ")");
    }
    return pass("small " + fmt(small) + " vs transformer-only " + fmt(tf_only) + ", gap " +
                fmt(small - tf_only));
}

Verdict criterion_readout_ablation(NciCache& c) {
    if (!ensure_nci(c)) return blocked(c.reason);
    const double cls = mean_of(run_seeds(c, load_preset(c, "nci-small.cfg"), "nci-small"));
    RunConfig mean_cfg = load_preset(c, "nci-small.cfg");
    mean_cfg.tf.readout = Readout::MEAN;
    const double mean_acc = mean_of(run_seeds(c, mean_cfg, "nci-small-mean"));
    if (cls < mean_acc - 0.01) {
        return fail("cls " + fmt(cls) + " < mean-readout " + fmt(mean_acc) + " - 0.01");
    }
    return pass("cls " + fmt(cls) + " vs mean-readout " + fmt(mean_acc));
}

Verdict criterion_frozen_gnn(NciCache& c) {
    if (!ensure_nci(c)) return blocked(c.reason);
    const RunConfig base = load_preset(c, "nci-small.cfg");

    std::vector<double> gnn_accs, frozen_accs, tuned_accs;
    for (const auto seed : c.seeds) {
        auto splits = split(c.ds, base.split_train, base.split_valid, derive_seed(seed, 4));

        auto pre = train<float>(splits, base.gnn, base.tf, base.training,
                                TrainMode::GNN_ONLY, seed);
        gnn_accs.push_back(pre.result.test_at_best);
        const std::string ckpt = "/tmp/acceptance_gnn_seed" + std::to_string(seed) + ".bin";
        ParamList<float> gnn_list;
        pre.gnn_only.gnn.collect(gnn_list);
        save_checkpoint(ckpt, gnn_list,
                        config_fingerprint(
                            gnn_arch_string(base.gnn, c.ds.num_node_label_values)));

        TrainConfig frozen_tc = base.training;
        frozen_tc.pretrained_gnn = ckpt;
        frozen_tc.freeze_gnn = true;
        auto frozen = train<float>(splits, base.gnn, base.tf, frozen_tc, TrainMode::FULL,
                                   seed);
        frozen_accs.push_back(frozen.result.test_at_best);

        TrainConfig tuned_tc = frozen_tc;
        tuned_tc.freeze_gnn = false;
        auto tuned =
            train<float>(splits, base.gnn, base.tf, tuned_tc, TrainMode::FULL, seed);
        tuned_accs.push_back(tuned.result.test_at_best);
        std::cout << "  [frozen-gnn] seed " << seed << ": gnn-only "
                  << fmt(pre.result.test_at_best) << ", frozen "
                  << fmt(frozen.result.test_at_best) << ", fine-tuned "
                  << fmt(tuned.result.test_at_best) << "\n";
    }
    const double g = mean_of(gnn_accs), f = mean_of(frozen_accs), t = mean_of(tuned_accs);
    if (f < g) return fail("frozen " + fmt(f) + " < gnn-only " + fmt(g));
    if (t < f) return fail("fine-tuned " + fmt(t) + " < frozen " + fmt(f));
    return pass("gnn-only " + fmt(g) + " <= frozen " + fmt(f) + " <= fine-tuned " + fmt(t));
}

// ------------------------------------------------------------ criteria 9-10

Verdict criterion_profiler() {
    GnnConfig gcfg;
    TransformerConfig tcfg;
    const std::vector<int> nodes = {500, 1000, 1200};
    const std::vector<double> densities = {0.2, 0.4};
    auto cells = profile<float>(nodes, densities, gcfg, tcfg, 7);

    std::ostringstream csv;
    write_profile_csv(cells, csv);
    if (cells.size() != nodes.size() * densities.size()) {
        return fail("profile grid incomplete: " + std::to_string(cells.size()) + " cells");
    }
    std::string summary;
    for (std::size_t d = 0; d < densities.size(); ++d) {
        double prev = -1.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& cell = cells[d * nodes.size() + i];
            if (cell.oom) {
                return fail("cell n=" + std::to_string(cell.nodes) + " density=" +
                            fmt(cell.density) + " hit OOM");
            }
            if (cell.iter_mean_ms < prev) {
                return fail("iteration time not monotone at n=" +
                            std::to_string(cell.nodes) + " density=" + fmt(cell.density) +
                            ": " + fmt(cell.iter_mean_ms) + " ms after " + fmt(prev) +
                            " ms");
            }
            prev = cell.iter_mean_ms;
            summary += " n" + std::to_string(cell.nodes) + "@" + fmt(cell.density) + "=" +
                       fmt(cell.iter_mean_ms) + "ms";
        }
    }
    return pass("complete CSV, iteration time non-decreasing per density;" + summary);
}

Verdict criterion_determinism(const std::string& configs_dir) {
    RunConfig cfg = load_config_file(configs_dir + "/cycle-demo.cfg");
    validate_run_config(cfg);
    const std::uint64_t seed = 9;
    auto run_once = [&] {
        auto ds = make_cycle_pair_dataset(cfg.cycle_pairs, derive_seed(seed, 7));
        auto splits = split(ds, cfg.split_train, cfg.split_valid, derive_seed(seed, 4));
        auto out = train<float>(splits, cfg.gnn, cfg.tf, cfg.training, cfg.mode, seed);
        std::ostringstream os;
        write_metrics_csv(out.result, os);
        return os.str();
    };
    const std::string a = run_once();
    const std::string b = run_once();
    if (a != b) return fail("metrics CSV differs between identical re-runs");
    return pass("cycle-demo preset metrics CSV bitwise identical across re-runs (" +
                std::to_string(cfg.training.epochs) + " epochs, seed " +
                std::to_string(seed) + ")");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria runner"};
    std::string dataset_dir = "data";
    std::string configs_dir = "configs";
    std::string only;
    app.add_option("--dataset-dir", dataset_dir, "dataset root directory");
    app.add_option("--configs-dir", configs_dir, "shipped preset directory");
    app.add_option("--only", only, "comma-separated criterion numbers to run");
    CLI11_PARSE(app, argc, argv);

    std::set<int> selected;
    if (!only.empty()) {
        std::stringstream ss(only);
        std::string item;
        while (std::getline(ss, item, ',')) selected.insert(std::stoi(item));
    }
    auto wanted = [&](int n) { return selected.empty() || selected.count(n) > 0; };

    NciCache nci;
    nci.dataset_dir = dataset_dir;
    nci.configs_dir = configs_dir;

    const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
        {1, criterion_gradients},
        {2, criterion_permutation},
        {3, criterion_attention_oracle},
        {4, criterion_mask_saturation},
        {5, [&] { return criterion_nci_small(nci); }},
        {6, [&] { return criterion_vs_transformer_only(nci); }},
        {7, [&] { return criterion_readout_ablation(nci); }},
        {8, [&] { return criterion_frozen_gnn(nci); }},
        {9, criterion_profiler},
        {10, [&] { return criterion_determinism(configs_dir); }},
    };

    bool any_fail = false;
    for (const auto& [num, fn] : criteria) {
        if (!wanted(num)) continue;
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = fail(std::string("unexpected error: ") + e.what());
        }
        const char* label = v.status == Verdict::PASS     ? "PASS"
                            : v.status == Verdict::FAIL   ? "FAIL"
                                                          : "BLOCKED";
        std::cout << "criterion " << num << ": " << label << " — " << v.detail << "\n";
        any_fail = any_fail || v.status == Verdict::FAIL;
    }
    return any_fail ? 1 : 0;
}
