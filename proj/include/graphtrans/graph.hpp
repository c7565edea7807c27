#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "graphtrans/rng.hpp"
#include "graphtrans/tensor.hpp"

namespace graphtrans {

enum class GnnType { GCN, GIN };

inline std::string gnn_type_name(GnnType t) { return t == GnnType::GCN ? "gcn" : "gin"; }

// Undirected graph; each edge stored once with u < v, no self-loops.
struct Graph {
    int num_nodes = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> node_labels;
    int label = 0;
};

inline void validate_graph(const Graph& g) {
    if (g.num_nodes < 0) throw ValueError("graph: negative node count");
    if (static_cast<int>(g.node_labels.size()) != g.num_nodes) {
        throw ValueError("graph: " + std::to_string(g.node_labels.size()) +
                         " node labels for " + std::to_string(g.num_nodes) + " nodes");
    }
    std::set<std::pair<int, int>> seen;
    for (auto [u, v] : g.edges) {
        if (u < 0 || u >= g.num_nodes || v < 0 || v >= g.num_nodes) {
            throw ValueError("graph: edge (" + std::to_string(u) + "," + std::to_string(v) +
                             ") outside [0," + std::to_string(g.num_nodes) + ")");
        }
        if (u == v) {
            throw ValueError("graph: self-loop at node " + std::to_string(u));
        }
        auto key = std::minmax(u, v);
        if (!seen.insert(key).second) {
            throw ValueError("graph: duplicate edge (" + std::to_string(key.first) + "," +
                             std::to_string(key.second) + ")");
        }
    }
}

// Relabel nodes: node i of the input becomes node perm[i] of the output.
inline Graph permute_graph(const Graph& g, const std::vector<int>& perm) {
    if (static_cast<int>(perm.size()) != g.num_nodes) {
        throw ValueError("permute_graph: permutation size mismatch");
    }
    Graph out;
    out.num_nodes = g.num_nodes;
    out.label = g.label;
    out.node_labels.resize(g.node_labels.size());
    for (int i = 0; i < g.num_nodes; ++i) {
        out.node_labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
            g.node_labels[static_cast<std::size_t>(i)];
    }
    out.edges.reserve(g.edges.size());
    for (auto [u, v] : g.edges) {
        auto key = std::minmax(perm[static_cast<std::size_t>(u)],
                               perm[static_cast<std::size_t>(v)]);
        out.edges.emplace_back(key.first, key.second);
    }
    std::sort(out.edges.begin(), out.edges.end());
    return out;
}

struct Dataset {
    std::vector<Graph> graphs;
    int num_node_label_values = 0;
    int num_classes = 0;
    std::string name;

    std::size_t size() const { return graphs.size(); }
};

// One padded minibatch. The node-label block uses the sentinel id
// num_node_label_values for padding slots (a dedicated embedding row that is
// always masked out downstream). Adjacency is layer-ready: GCN batches carry
// the symmetric-normalized-with-self-loops form, GIN batches the raw 0/1 form.
template <class S>
struct Batch {
    std::vector<int> node_label_block;  // [B * N_max]
    BoolTensor padding_mask;            // [B, N_max], true = real node
    Tensor<S> adjacency;                // [B, N_max, N_max]
    std::vector<int> labels;            // [B]
    std::vector<int> graph_sizes;       // [B]
    std::vector<Graph> graphs;          // retained for structural masks
    int n_max = 0;

    int batch_size() const { return static_cast<int>(labels.size()); }
};

template <class S>
Batch<S> make_batch(const std::vector<Graph>& graphs, GnnType gnn_type,
                    int num_node_label_values) {
    if (graphs.empty()) throw ValueError("make_batch: empty graph list");
    const int b = static_cast<int>(graphs.size());
    int n_max = 0;
    for (const Graph& g : graphs) n_max = std::max(n_max, g.num_nodes);
    if (n_max == 0) throw ValueError("make_batch: all graphs are empty");

    Batch<S> batch;
    batch.graphs = graphs;
    batch.n_max = n_max;
    batch.node_label_block.assign(static_cast<std::size_t>(b) * n_max,
                                  num_node_label_values);
    batch.padding_mask = BoolTensor({b, n_max}, 0);
    batch.adjacency = Tensor<S>({b, n_max, n_max});
    batch.labels.resize(static_cast<std::size_t>(b));
    batch.graph_sizes.resize(static_cast<std::size_t>(b));

    for (int i = 0; i < b; ++i) {
        const Graph& g = graphs[static_cast<std::size_t>(i)];
        for (int v = 0; v < g.num_nodes; ++v) {
            const int lab = g.node_labels[static_cast<std::size_t>(v)];
            if (lab < 0 || lab >= num_node_label_values) {
                throw ValueError("make_batch: node label " + std::to_string(lab) +
                                 " outside [0," + std::to_string(num_node_label_values) + ")");
            }
            batch.node_label_block[static_cast<std::size_t>(i) * n_max + v] = lab;
            batch.padding_mask.v[static_cast<std::size_t>(i) * n_max + v] = 1;
        }
        batch.labels[static_cast<std::size_t>(i)] = g.label;
        batch.graph_sizes[static_cast<std::size_t>(i)] = g.num_nodes;

        S* adj = batch.adjacency.ptr() +
                 static_cast<std::size_t>(i) * n_max * n_max;
        if (gnn_type == GnnType::GIN) {
            for (auto [u, v] : g.edges) {
                adj[static_cast<std::size_t>(u) * n_max + v] = S(1);
                adj[static_cast<std::size_t>(v) * n_max + u] = S(1);
            }
        } else {
            std::vector<int> deg(static_cast<std::size_t>(g.num_nodes), 1);  // self-loop
            for (auto [u, v] : g.edges) {
                ++deg[static_cast<std::size_t>(u)];
                ++deg[static_cast<std::size_t>(v)];
            }
            std::vector<S> inv_sqrt(static_cast<std::size_t>(g.num_nodes));
            for (int v = 0; v < g.num_nodes; ++v) {
                inv_sqrt[static_cast<std::size_t>(v)] =
                    S(1) / std::sqrt(static_cast<S>(deg[static_cast<std::size_t>(v)]));
            }
            for (int v = 0; v < g.num_nodes; ++v) {
                adj[static_cast<std::size_t>(v) * n_max + v] =
                    inv_sqrt[static_cast<std::size_t>(v)] * inv_sqrt[static_cast<std::size_t>(v)];
            }
            for (auto [u, v] : g.edges) {
                const S w = inv_sqrt[static_cast<std::size_t>(u)] *
                            inv_sqrt[static_cast<std::size_t>(v)];
                adj[static_cast<std::size_t>(u) * n_max + v] = w;
                adj[static_cast<std::size_t>(v) * n_max + u] = w;
            }
        }
    }
    return batch;
}

// Seeded uniform shuffle, then contiguous slices of floor(r_train*n) and
// floor(r_valid*n) graphs; the remainder becomes the test set.
struct SplitResult {
    Dataset train, valid, test;
};

inline SplitResult split(const Dataset& ds, double r_train, double r_valid,
                         std::uint64_t seed) {
    if (ds.graphs.empty()) throw ValueError("split: empty dataset");
    if (r_train <= 0.0 || r_valid < 0.0 || r_train + r_valid >= 1.0) {
        throw ValueError("split: ratios must satisfy 0 < train, 0 <= valid, train+valid < 1");
    }
    const std::size_t n = ds.graphs.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    const std::size_t n_train = static_cast<std::size_t>(
        std::floor(r_train * static_cast<double>(n)));
    const std::size_t n_valid = static_cast<std::size_t>(
        std::floor(r_valid * static_cast<double>(n)));

    SplitResult out;
    for (Dataset* part : {&out.train, &out.valid, &out.test}) {
        part->num_node_label_values = ds.num_node_label_values;
        part->num_classes = ds.num_classes;
        part->name = ds.name;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Graph& g = ds.graphs[order[i]];
        if (i < n_train) {
            out.train.graphs.push_back(g);
        } else if (i < n_train + n_valid) {
            out.valid.graphs.push_back(g);
        } else {
            out.test.graphs.push_back(g);
        }
    }
    return out;
}

// Each of the C(n,2) undirected pairs is included independently with the
// given probability. All node labels and the class label are zero.
inline Graph erdos_renyi(int n, double density, std::uint64_t seed) {
    if (n < 0) throw ValueError("erdos_renyi: negative node count");
    if (density < 0.0 || density > 1.0) {
        throw ValueError("erdos_renyi: density must lie in [0,1], got " +
                         std::to_string(density));
    }
    Graph g;
    g.num_nodes = n;
    g.node_labels.assign(static_cast<std::size_t>(n), 0);
    Rng rng(seed);
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            if (rng.uniform() < density) g.edges.emplace_back(u, v);
        }
    }
    return g;
}

// Per-node reachability within n hops (self included), by truncated BFS.
struct HopMask {
    int num_nodes = 0;
    BoolTensor reach;  // [num_nodes, num_nodes]

    bool at(int u, int v) const {
        return reach.at(static_cast<std::size_t>(u) * num_nodes + v);
    }
};

inline HopMask hop_mask(const Graph& g, int n) {
    if (n < 1) throw ValueError("hop_mask: hop radius must be >= 1, got " + std::to_string(n));
    HopMask m;
    m.num_nodes = g.num_nodes;
    m.reach = BoolTensor({g.num_nodes, g.num_nodes}, 0);
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(g.num_nodes));
    for (auto [u, v] : g.edges) {
        adj[static_cast<std::size_t>(u)].push_back(v);
        adj[static_cast<std::size_t>(v)].push_back(u);
    }
    std::vector<int> dist(static_cast<std::size_t>(g.num_nodes));
    for (int s = 0; s < g.num_nodes; ++s) {
        std::fill(dist.begin(), dist.end(), -1);
        dist[static_cast<std::size_t>(s)] = 0;
        std::queue<int> q;
        q.push(s);
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            m.reach.v[static_cast<std::size_t>(s) * g.num_nodes + u] = 1;
            if (dist[static_cast<std::size_t>(u)] == n) continue;
            for (int v : adj[static_cast<std::size_t>(u)]) {
                if (dist[static_cast<std::size_t>(v)] < 0) {
                    dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
                    q.push(v);
                }
            }
        }
    }
    return m;
}

// Structure-only two-class corpus: for every pair draw, both classes receive
// the same node count and the same node-label multiset; class 0 is one cycle
// of length n, class 1 is two disjoint cycles of length n/2. A set-level
// model without structure sees identical token multisets for both classes.
inline Dataset make_cycle_pair_dataset(int pairs, std::uint64_t seed) {
    if (pairs < 1) throw ValueError("make_cycle_pair_dataset: need at least one pair");
    Rng rng(seed);
    Dataset ds;
    ds.name = "cycle-pairs";
    ds.num_node_label_values = 2;
    ds.num_classes = 2;
    for (int p = 0; p < pairs; ++p) {
        const int half = 3 + rng.uniform_int(3);  // 3..5 -> n in {6,8,10}
        const int n = 2 * half;
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (auto& l : labels) l = rng.uniform_int(2);

        Graph cycle;
        cycle.num_nodes = n;
        cycle.label = 0;
        cycle.node_labels = labels;
        rng.shuffle(cycle.node_labels);
        for (int v = 0; v < n; ++v) {
            const int w = (v + 1) % n;
            cycle.edges.emplace_back(std::min(v, w), std::max(v, w));
        }
        std::sort(cycle.edges.begin(), cycle.edges.end());

        Graph twin;
        twin.num_nodes = n;
        twin.label = 1;
        twin.node_labels = labels;
        rng.shuffle(twin.node_labels);
        for (int c = 0; c < 2; ++c) {
            const int base = c * half;
            for (int v = 0; v < half; ++v) {
                const int a = base + v;
                const int b = base + (v + 1) % half;
                twin.edges.emplace_back(std::min(a, b), std::max(a, b));
            }
        }
        std::sort(twin.edges.begin(), twin.edges.end());

        ds.graphs.push_back(std::move(cycle));
        ds.graphs.push_back(std::move(twin));
    }
    return ds;
}

}  // namespace graphtrans
