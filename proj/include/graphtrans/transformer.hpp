#pragma once

#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "graphtrans/gnn.hpp"
#include "graphtrans/ops.hpp"

namespace graphtrans {

enum class Readout { CLS, MEAN, LAST, CLS_CAT };

inline const char* readout_name(Readout r) {
    switch (r) {
        case Readout::CLS: return "cls";
        case Readout::MEAN: return "mean";
        case Readout::LAST: return "last";
        case Readout::CLS_CAT: return "cls_cat";
    }
    return "?";
}

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kStructuralGamma = 1e9;

// mask_schedule holds one entry per layer: 0 = dense attention, n >= 1 = only
// pairs within n hops may attend (plus the cls token, which is always global).
// An empty schedule means all layers dense.
struct TransformerConfig {
    int d_tf = 128;
    int ffn_dim = 512;
    int num_layers = 4;
    int num_heads = 4;
    double dropout = 0.0;
    Readout readout = Readout::CLS;
    std::vector<int> mask_schedule;
};

inline void validate_transformer_config(const TransformerConfig& cfg) {
    if (cfg.d_tf < 1) throw ConfigError("transformer: d_tf must be >= 1");
    if (cfg.ffn_dim < 1) throw ConfigError("transformer: ffn_dim must be >= 1");
    if (cfg.num_layers < 1) throw ConfigError("transformer: num_layers must be >= 1");
    if (cfg.num_heads < 1) throw ConfigError("transformer: num_heads must be >= 1");
    if (cfg.d_tf % cfg.num_heads != 0) {
        throw ConfigError("transformer: d_tf " + std::to_string(cfg.d_tf) +
                          " not divisible by num_heads " + std::to_string(cfg.num_heads));
    }
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) {
        throw ConfigError("transformer: dropout must lie in [0,1)");
    }
    if (!cfg.mask_schedule.empty() &&
        static_cast<int>(cfg.mask_schedule.size()) != cfg.num_layers) {
        throw ConfigError("transformer: mask_schedule has " +
                          std::to_string(cfg.mask_schedule.size()) + " entries for " +
                          std::to_string(cfg.num_layers) + " layers");
    }
    for (int n : cfg.mask_schedule) {
        if (n < 0) throw ConfigError("transformer: mask_schedule entries must be >= 0");
    }
}

inline bool readout_uses_cls(Readout r) {
    return r == Readout::CLS || r == Readout::CLS_CAT;
}

template <class S>
struct LayerNormParams {
    Tensor<S> gain;
    Tensor<S> bias;
};

template <class S>
struct TransformerLayerParams {
    Tensor<S> wq, bq;
    Tensor<S> wk, bk;
    Tensor<S> wv, bv;
    Tensor<S> wmix, bmix;
    Tensor<S> fc1_w, fc1_b;
    Tensor<S> fc2_w, fc2_b;
    LayerNormParams<S> ln1, ln2;
};

template <class S>
struct TransformerParams {
    Tensor<S> w_proj;  // [d_in, d_tf]; d_in doubles under the cls_cat readout
    LayerNormParams<S> ln_in;
    Tensor<S> cls_embedding;  // [d_tf]
    std::vector<TransformerLayerParams<S>> layers;
    Tensor<S> w_out;  // [d_tf, num_classes]

    void collect(ParamList<S>& out) const {
        out.emplace_back("tf.proj.w", w_proj);
        out.emplace_back("tf.ln_in.gain", ln_in.gain);
        out.emplace_back("tf.ln_in.bias", ln_in.bias);
        out.emplace_back("tf.cls", cls_embedding);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& p = layers[l];
            const std::string k = "tf.layer" + std::to_string(l) + ".";
            out.emplace_back(k + "wq", p.wq);
            out.emplace_back(k + "bq", p.bq);
            out.emplace_back(k + "wk", p.wk);
            out.emplace_back(k + "bk", p.bk);
            out.emplace_back(k + "wv", p.wv);
            out.emplace_back(k + "bv", p.bv);
            out.emplace_back(k + "wmix", p.wmix);
            out.emplace_back(k + "bmix", p.bmix);
            out.emplace_back(k + "fc1_w", p.fc1_w);
            out.emplace_back(k + "fc1_b", p.fc1_b);
            out.emplace_back(k + "fc2_w", p.fc2_w);
            out.emplace_back(k + "fc2_b", p.fc2_b);
            out.emplace_back(k + "ln1.gain", p.ln1.gain);
            out.emplace_back(k + "ln1.bias", p.ln1.bias);
            out.emplace_back(k + "ln2.gain", p.ln2.gain);
            out.emplace_back(k + "ln2.bias", p.ln2.bias);
        }
        out.emplace_back("tf.out.w", w_out);
    }
};

template <class S>
TransformerParams<S> init_transformer_params(const TransformerConfig& cfg, int d_gnn,
                                             int num_classes, Rng& rng) {
    validate_transformer_config(cfg);
    if (d_gnn < 1) throw ConfigError("transformer: input width must be >= 1");
    if (num_classes < 2) throw ConfigError("transformer: need at least 2 classes");

    const int d_in = (cfg.readout == Readout::CLS_CAT) ? 2 * d_gnn : d_gnn;
    const int d = cfg.d_tf;
    const int f = cfg.ffn_dim;

    TransformerParams<S> p;
    p.w_proj = glorot_uniform<S>(d_in, d, {d_in, d}, rng);
    p.ln_in = {ones_param<S>({d}), zeros_param<S>({d})};
    p.cls_embedding = normal_init<S>({d}, S(0.02), rng);
    p.layers.resize(static_cast<std::size_t>(cfg.num_layers));
    for (auto& lp : p.layers) {
        lp.wq = glorot_uniform<S>(d, d, {d, d}, rng);
        lp.bq = zeros_param<S>({d});
        lp.wk = glorot_uniform<S>(d, d, {d, d}, rng);
        lp.bk = zeros_param<S>({d});
        lp.wv = glorot_uniform<S>(d, d, {d, d}, rng);
        lp.bv = zeros_param<S>({d});
        lp.wmix = glorot_uniform<S>(d, d, {d, d}, rng);
        lp.bmix = zeros_param<S>({d});
        lp.fc1_w = glorot_uniform<S>(d, f, {d, f}, rng);
        lp.fc1_b = zeros_param<S>({f});
        lp.fc2_w = glorot_uniform<S>(f, d, {f, d}, rng);
        lp.fc2_b = zeros_param<S>({d});
        lp.ln1 = {ones_param<S>({d}), zeros_param<S>({d})};
        lp.ln2 = {ones_param<S>({d}), zeros_param<S>({d})};
    }
    p.w_out = glorot_uniform<S>(d, num_classes, {d, num_classes}, rng);
    return p;
}

// LayerNorm(h . w_proj); padded rows are mapped and then re-zeroed.
template <class S>
Tensor<S> project_input(const Tensor<S>& h, const TransformerParams<S>& params,
                        const BoolTensor& padding_mask) {
    auto y = layer_norm(matmul(h, params.w_proj), params.ln_in.gain, params.ln_in.bias,
                        S(kLayerNormEps));
    return zero_masked_rows(y, padding_mask);
}

// Prepend the learnable cls token at position 0; it is real for every graph.
template <class S>
std::pair<Tensor<S>, BoolTensor> append_cls(const Tensor<S>& h, const Tensor<S>& cls,
                                            const BoolTensor& mask) {
    auto out = prepend_token(h, cls);
    const int b = h.dim(0), s = h.dim(1);
    BoolTensor ext({b, s + 1}, 0);
    for (int i = 0; i < b; ++i) {
        ext.v[static_cast<std::size_t>(i) * (s + 1)] = 1;
        for (int j = 0; j < s; ++j) {
            ext.v[static_cast<std::size_t>(i) * (s + 1) + 1 + j] =
                mask.v[static_cast<std::size_t>(i) * s + j];
        }
    }
    return {out, ext};
}

// Additive structural penalty [B,1,S,S]: -gamma where a pair is out of hop
// range, 0 where allowed. The cls slot (index 0, when present) is globally
// connected in both directions; padded slots are left at 0 because the
// exclusion-based padding mask already removes them.
template <class S>
Tensor<S> structural_penalty(const std::vector<HopMask>& hop_masks, int seq_len,
                             bool has_cls, S gamma) {
    const int b = static_cast<int>(hop_masks.size());
    const int off = has_cls ? 1 : 0;
    Tensor<S> out = Tensor<S>::zeros({b, 1, seq_len, seq_len});
    for (int g = 0; g < b; ++g) {
        const HopMask& hm = hop_masks[static_cast<std::size_t>(g)];
        if (hm.num_nodes + off > seq_len) {
            throw ShapeError("structural_penalty: hop mask larger than sequence");
        }
        S* base = out.ptr() + static_cast<std::size_t>(g) * seq_len * seq_len;
        for (int i = 0; i < hm.num_nodes; ++i) {
            for (int j = 0; j < hm.num_nodes; ++j) {
                if (!hm.at(i, j)) {
                    base[static_cast<std::size_t>(i + off) * seq_len + (j + off)] = -gamma;
                }
            }
        }
    }
    return out;
}

// One encoder layer: multi-head attention, then the post-norm FFN block
//   x -> attn -> dropout -> (+x) -> LN1 -> fc1 -> relu -> dropout -> fc2
//     -> dropout -> (+LN1 output) -> LN2
// `key_mask` is the exclusion mask over keys, shaped [B,1,1,S]; `penalty` is
// the optional additive structural term [B,1,S,S]. When `alpha_out` is given
// it receives the post-softmax attention weights [B,H,S,S].
template <class S>
Tensor<S> attention_layer(const Tensor<S>& x, const BoolTensor& key_mask,
                          const Tensor<S>* penalty, const TransformerLayerParams<S>& p,
                          int num_heads, double dropout_p = 0.0, bool training = false,
                          CounterRng* rng = nullptr, Tensor<S>* alpha_out = nullptr) {
    if (x.rank() != 3) {
        throw ShapeError("attention_layer: expected [B,S,D], got " + shape_str(x.shape()));
    }
    const int d = x.dim(2);
    if (d % num_heads != 0) {
        throw ShapeError("attention_layer: width not divisible by head count");
    }
    const int dh = d / num_heads;

    auto q = split_heads(add_bias(matmul(x, p.wq), p.bq), num_heads);
    auto k = split_heads(add_bias(matmul(x, p.wk), p.bk), num_heads);
    auto v = split_heads(add_bias(matmul(x, p.wv), p.bv), num_heads);

    auto scores = scale(matmul(q, transpose_last(k)), S(1) / std::sqrt(S(dh)));
    if (penalty != nullptr) scores = add_broadcast(scores, *penalty);
    auto alpha = masked_softmax(scores, key_mask);
    if (alpha_out != nullptr) *alpha_out = alpha;

    auto ctx = merge_heads(matmul(alpha, v));
    auto attn = add_bias(matmul(ctx, p.wmix), p.bmix);
    attn = dropout(attn, dropout_p, training, rng);

    auto y = layer_norm(add(x, attn), p.ln1.gain, p.ln1.bias, S(kLayerNormEps));
    auto z = dropout(relu(add_bias(matmul(y, p.fc1_w), p.fc1_b)), dropout_p, training, rng);
    z = add_bias(matmul(z, p.fc2_w), p.fc2_b);
    z = dropout(z, dropout_p, training, rng);
    return layer_norm(add(y, z), p.ln2.gain, p.ln2.bias, S(kLayerNormEps));
}

// Collapse the token sequence to one vector per graph. `sequence_has_cls`
// records how the sequence was built; cls readouts demand the slot and
// mean/last demand its absence (the cls token must not pollute either).
template <class S>
Tensor<S> readout(const Tensor<S>& h, Readout mode, const BoolTensor& mask,
                  bool sequence_has_cls) {
    if (h.rank() != 3) {
        throw ShapeError("readout: expected [B,S,D], got " + shape_str(h.shape()));
    }
    const int b = h.dim(0);
    if (readout_uses_cls(mode)) {
        if (!sequence_has_cls) {
            throw ValueError("readout: cls readout over a sequence built without cls");
        }
        return select_tokens(h, std::vector<int>(static_cast<std::size_t>(b), 0));
    }
    if (sequence_has_cls) {
        throw ValueError("readout: mean/last readout over a cls-bearing sequence");
    }
    if (mode == Readout::MEAN) return masked_mean_tokens(h, mask);
    // LAST: the final real (unpadded) token; real tokens are contiguous from 0.
    const int s = h.dim(1);
    std::vector<int> idx(static_cast<std::size_t>(b), 0);
    for (int i = 0; i < b; ++i) {
        int count = 0;
        for (int j = 0; j < s; ++j) {
            count += mask.v[static_cast<std::size_t>(i) * s + j] ? 1 : 0;
        }
        if (count == 0) throw ValueError("readout: sequence " + std::to_string(i) + " has no real token");
        idx[static_cast<std::size_t>(i)] = count - 1;
    }
    return select_tokens(h, idx);
}

// Class probabilities from a graph embedding (rows sum to 1).
template <class S>
Tensor<S> predict(const Tensor<S>& graph_embedding, const Tensor<S>& w_out) {
    return softmax(matmul(graph_embedding, w_out));
}

template <class S>
struct AttentionMap {
    int layer = 0;
    int head = 0;
    int graph = 0;
    int size = 0;                // tokens kept: graph size, +1 when cls present
    std::vector<S> alpha;        // row-major [size x size], cls at index 0
};

// Slice per-graph maps out of the batched [B,H,S,S] attention weights,
// trimming away padded slots.
template <class S>
void extract_attention_maps(const Tensor<S>& alpha, int layer,
                            const std::vector<int>& graph_sizes, bool has_cls,
                            std::vector<AttentionMap<S>>& out) {
    const int b = alpha.dim(0), heads = alpha.dim(1), s = alpha.dim(2);
    for (int g = 0; g < b; ++g) {
        const int sz = graph_sizes[static_cast<std::size_t>(g)] + (has_cls ? 1 : 0);
        for (int h = 0; h < heads; ++h) {
            AttentionMap<S> m;
            m.layer = layer;
            m.head = h;
            m.graph = g;
            m.size = sz;
            m.alpha.resize(static_cast<std::size_t>(sz) * sz);
            const S* base = alpha.ptr() +
                            (static_cast<std::size_t>(g) * heads + h) * s * s;
            for (int i = 0; i < sz; ++i) {
                for (int j = 0; j < sz; ++j) {
                    m.alpha[static_cast<std::size_t>(i) * sz + j] =
                        base[static_cast<std::size_t>(i) * s + j];
                }
            }
            out.push_back(std::move(m));
        }
    }
}

// CSV with a header row/col of token indices; index 0 is the cls slot when
// the sequence carries one.
template <class S>
void write_attention_csv(const AttentionMap<S>& m, std::ostream& os) {
    os << "token";
    for (int j = 0; j < m.size; ++j) os << "," << j;
    os << "\n";
    for (int i = 0; i < m.size; ++i) {
        os << i;
        for (int j = 0; j < m.size; ++j) {
            os << "," << m.alpha[static_cast<std::size_t>(i) * m.size + j];
        }
        os << "\n";
    }
}

template <class S>
struct GraphTransParams {
    GnnParams<S> gnn;
    TransformerParams<S> tf;

    void collect(ParamList<S>& out) const {
        gnn.collect(out);
        tf.collect(out);
    }
};

template <class S>
GraphTransParams<S> init_graphtrans_params(const GnnConfig& gcfg,
                                           const TransformerConfig& tcfg,
                                           int num_node_label_values, int num_classes,
                                           Rng& rng) {
    GraphTransParams<S> p;
    p.gnn = init_gnn_params<S>(gcfg, num_node_label_values, rng);
    p.tf = init_transformer_params<S>(tcfg, gcfg.hidden_dim, num_classes, rng);
    return p;
}

template <class S>
struct ForwardResult {
    Tensor<S> logits;  // [B, num_classes]
    Tensor<S> probs;   // [B, num_classes]
    std::vector<AttentionMap<S>> attention;  // filled when capture_attention
};

// Full pipeline: gnn -> projection+LayerNorm -> (cls) -> encoder stack ->
// readout -> output head. Hop-restricted layers draw their masks from the
// graphs stored in the batch.
template <class S>
ForwardResult<S> graphtrans_forward(const Batch<S>& batch, const GnnConfig& gcfg,
                                    const TransformerConfig& tcfg,
                                    const GraphTransParams<S>& params,
                                    bool training = false, CounterRng* rng = nullptr,
                                    bool capture_attention = false) {
    validate_gnn_config(gcfg);
    validate_transformer_config(tcfg);
    if (static_cast<int>(params.tf.layers.size()) != tcfg.num_layers) {
        throw ConfigError("graphtrans_forward: params built for " +
                          std::to_string(params.tf.layers.size()) + " layers, config has " +
                          std::to_string(tcfg.num_layers));
    }
    const int b = batch.batch_size();

    auto h_gnn = gnn_forward(batch, gcfg, params.gnn, training, rng);
    Tensor<S> h_in = h_gnn;
    if (tcfg.readout == Readout::CLS_CAT) {
        auto h0 = zero_masked_rows(
            embedding_lookup(params.gnn.embedding, batch.node_label_block,
                             {b, batch.n_max}),
            batch.padding_mask);
        h_in = concat_last(h0, h_gnn);
    }
    if (params.tf.w_proj.dim(0) != h_in.dim(2)) {
        throw ConfigError("graphtrans_forward: w_proj expects width " +
                          std::to_string(params.tf.w_proj.dim(0)) + ", gnn provides " +
                          std::to_string(h_in.dim(2)));
    }

    auto x = project_input(h_in, params.tf, batch.padding_mask);
    const bool has_cls = readout_uses_cls(tcfg.readout);
    BoolTensor tok_mask = batch.padding_mask;
    if (has_cls) {
        auto [xc, mc] = append_cls(x, params.tf.cls_embedding, batch.padding_mask);
        x = xc;
        tok_mask = mc;
    }
    const int seq_len = x.dim(1);

    BoolTensor key_mask({b, 1, 1, seq_len}, 0);
    key_mask.v = tok_mask.v;

    if (!tcfg.mask_schedule.empty() && batch.graphs.empty()) {
        throw ConfigError("graphtrans_forward: hop-masked layers need graphs in the batch");
    }
    std::map<int, Tensor<S>> penalty_cache;
    std::vector<AttentionMap<S>> maps;
    for (int l = 0; l < tcfg.num_layers; ++l) {
        const int hops = tcfg.mask_schedule.empty()
                             ? 0
                             : tcfg.mask_schedule[static_cast<std::size_t>(l)];
        const Tensor<S>* penalty = nullptr;
        if (hops > 0) {
            auto it = penalty_cache.find(hops);
            if (it == penalty_cache.end()) {
                std::vector<HopMask> hms;
                hms.reserve(batch.graphs.size());
                for (const Graph& g : batch.graphs) hms.push_back(hop_mask(g, hops));
                it = penalty_cache
                         .emplace(hops, structural_penalty<S>(hms, seq_len, has_cls,
                                                              S(kStructuralGamma)))
                         .first;
            }
            penalty = &it->second;
        }
        Tensor<S> alpha;
        x = attention_layer(x, key_mask, penalty,
                            params.tf.layers[static_cast<std::size_t>(l)], tcfg.num_heads,
                            tcfg.dropout, training, rng,
                            capture_attention ? &alpha : nullptr);
        if (capture_attention) {
            extract_attention_maps(alpha, l, batch.graph_sizes, has_cls, maps);
        }
    }

    auto emb = readout(x, tcfg.readout, tok_mask, has_cls);
    ForwardResult<S> res;
    res.logits = matmul(emb, params.tf.w_out);
    res.probs = softmax(res.logits);
    res.attention = std::move(maps);
    return res;
}

}  // namespace graphtrans
