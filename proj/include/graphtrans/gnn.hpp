#pragma once

#include <string>
#include <utility>
#include <vector>

#include "graphtrans/graph.hpp"
#include "graphtrans/ops.hpp"

namespace graphtrans {

struct GnnConfig {
    GnnType gnn_type = GnnType::GCN;
    int num_layers = 3;   // 0 = embedding-only (no message passing)
    int hidden_dim = 128;
    double dropout = 0.0;
    bool use_virtual_node = false;
};

inline void validate_gnn_config(const GnnConfig& cfg) {
    if (cfg.num_layers < 0) throw ConfigError("gnn: num_layers must be >= 0");
    if (cfg.hidden_dim < 1) throw ConfigError("gnn: hidden_dim must be >= 1");
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
        throw ConfigError("gnn: dropout must lie in [0,1)");
    }
}

// Named parameter list shared by the optimizer, checkpoints, and grad checks.
template <class S>
using ParamList = std::vector<std::pair<std::string, Tensor<S>>>;

template <class S>
struct GnnParams {
    // embedding table [num_node_label_values + 1, d]; the extra row is the
    // padding sentinel (masked out downstream)
    Tensor<S> embedding;

    struct Layer {
        Tensor<S> w;                 // GCN weight [d, d]
        Tensor<S> mlp_w1, mlp_w2;    // GIN two-layer MLP [d, d] each
        Tensor<S> eps;               // GIN learnable epsilon, single element
    };
    std::vector<Layer> layers;

    struct VnMlp {
        Tensor<S> w1, w2;  // virtual-node MLP [d, d] each
    };
    std::vector<VnMlp> vn;  // one per between-layer slot when enabled

    void collect(ParamList<S>& out) const {
        out.emplace_back("gnn.embedding", embedding);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const std::string p = "gnn.layer" + std::to_string(i) + ".";
            if (layers[i].w.defined()) out.emplace_back(p + "w", layers[i].w);
            if (layers[i].mlp_w1.defined()) {
                out.emplace_back(p + "mlp_w1", layers[i].mlp_w1);
                out.emplace_back(p + "mlp_w2", layers[i].mlp_w2);
                out.emplace_back(p + "eps", layers[i].eps);
            }
        }
        for (std::size_t i = 0; i < vn.size(); ++i) {
            const std::string p = "gnn.vn" + std::to_string(i) + ".";
            out.emplace_back(p + "w1", vn[i].w1);
            out.emplace_back(p + "w2", vn[i].w2);
        }
    }
};

template <class S>
GnnParams<S> init_gnn_params(const GnnConfig& cfg, int num_node_label_values, Rng& rng) {
    validate_gnn_config(cfg);
    GnnParams<S> p;
    const int d = cfg.hidden_dim;
    p.embedding = normal_init<S>({num_node_label_values + 1, d}, 0.02, rng);
    p.layers.resize(static_cast<std::size_t>(cfg.num_layers));
    for (auto& layer : p.layers) {
        if (cfg.gnn_type == GnnType::GCN) {
            layer.w = glorot_uniform<S>(d, d, {d, d}, rng);
        } else {
            layer.mlp_w1 = glorot_uniform<S>(d, d, {d, d}, rng);
            layer.mlp_w2 = glorot_uniform<S>(d, d, {d, d}, rng);
            layer.eps = zeros_param<S>({1});
        }
    }
    if (cfg.use_virtual_node && cfg.num_layers > 1) {
        p.vn.resize(static_cast<std::size_t>(cfg.num_layers - 1));
        for (auto& m : p.vn) {
            m.w1 = glorot_uniform<S>(d, d, {d, d}, rng);
            m.w2 = glorot_uniform<S>(d, d, {d, d}, rng);
        }
    }
    return p;
}

// relu(A_hat · h · W), then dropout when training. Padded rows of A_hat are
// zero, so padded outputs stay zero.
template <class S>
Tensor<S> gcn_layer(const Tensor<S>& h, const Tensor<S>& adjacency, const Tensor<S>& w,
                    double dropout_p = 0.0, bool training = false,
                    CounterRng* rng = nullptr) {
    auto out = relu(matmul(adjacency, matmul(h, w)));
    return dropout(out, dropout_p, training, rng);
}

// relu(MLP((1+eps)·h_v + sum of neighbor h_u)), MLP = FC -> relu -> FC without
// biases; then dropout when training. Uses the raw 0/1 adjacency.
template <class S>
Tensor<S> gin_layer(const Tensor<S>& h, const Tensor<S>& adjacency, const Tensor<S>& w1,
                    const Tensor<S>& w2, const Tensor<S>& eps, double dropout_p = 0.0,
                    bool training = false, CounterRng* rng = nullptr) {
    auto z = add(matmul(adjacency, h), add(h, scale_by(h, eps)));
    auto out = relu(matmul(relu(matmul(z, w1)), w2));
    return dropout(out, dropout_p, training, rng);
}

// v' = MLP(v + mask-respecting sum of h over tokens); h' = h + v' broadcast
// to real nodes only. MLP = FC -> relu -> FC without biases.
template <class S>
std::pair<Tensor<S>, Tensor<S>> virtual_node_update(const Tensor<S>& h,
                                                    const Tensor<S>& v_state,
                                                    const BoolTensor& mask,
                                                    const Tensor<S>& w1,
                                                    const Tensor<S>& w2) {
    auto pooled = add(v_state, masked_sum_tokens(h, mask));
    auto v_next = matmul(relu(matmul(pooled, w1)), w2);
    const int batch = h.dim(0), d = h.dim(2);
    auto lifted = reshape(v_next, {batch, 1, d});
    auto h_next = zero_masked_rows(add_broadcast(h, lifted), mask);
    return {h_next, v_next};
}

// Embedding lookup then the configured layer stack, with virtual-node updates
// interleaved between layers when enabled. Padded rows are exactly zero.
template <class S>
Tensor<S> gnn_forward(const Batch<S>& batch, const GnnConfig& cfg,
                      const GnnParams<S>& params, bool training = false,
                      CounterRng* rng = nullptr) {
    validate_gnn_config(cfg);
    if (static_cast<int>(params.layers.size()) != cfg.num_layers) {
        throw ConfigError("gnn_forward: config expects " + std::to_string(cfg.num_layers) +
                          " layers, params carry " + std::to_string(params.layers.size()));
    }
    const int b = batch.batch_size();
    auto h = embedding_lookup(params.embedding, batch.node_label_block,
                              {b, batch.n_max});
    h = zero_masked_rows(h, batch.padding_mask);
    if (cfg.num_layers == 0) return h;

    Tensor<S> v_state;
    if (cfg.use_virtual_node) v_state = Tensor<S>::zeros({b, cfg.hidden_dim});

    for (int l = 0; l < cfg.num_layers; ++l) {
        if (cfg.use_virtual_node && l > 0) {
            const auto& mlp = params.vn[static_cast<std::size_t>(l - 1)];
            auto [h2, v2] = virtual_node_update(h, v_state, batch.padding_mask,
                                                mlp.w1, mlp.w2);
            h = h2;
            v_state = v2;
        }
        const auto& layer = params.layers[static_cast<std::size_t>(l)];
        if (cfg.gnn_type == GnnType::GCN) {
            h = gcn_layer(h, batch.adjacency, layer.w, cfg.dropout, training, rng);
        } else {
            h = gin_layer(h, batch.adjacency, layer.mlp_w1, layer.mlp_w2, layer.eps,
                          cfg.dropout, training, rng);
        }
    }
    return h;
}

}  // namespace graphtrans
