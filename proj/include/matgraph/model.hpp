#pragma once

// Message-passing encoder (GraphSAGE mean/LSTM or degree-normalised graph
// convolution), jumping-knowledge summation over layers and the MLP head.
//
// Everything is templated on the scalar so the float training model and the
// double finite-difference shadow share one definition.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "matgraph/errors.hpp"
#include "matgraph/graph.hpp"
#include "matgraph/json.hpp"
#include "matgraph/optim.hpp"
#include "matgraph/tensor.hpp"
#include "matgraph/util.hpp"

namespace matgraph {

enum class LayerKind { SageMean, SageLstm, GConv };
const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct ModelConfig {
  int num_layers = 3;
  int hidden = 64;
  LayerKind kind = LayerKind::SageMean;
  std::size_t input_width = 0;
  std::size_t num_classes = 0;
  std::uint64_t seed = 0;
  bool edge_features = true;  // message projection over [h_u | e_uv]
  double leaky_slope = 0.2;

  void validate() const;
  json to_json() const;
  static ModelConfig from_json(const json& doc);
  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct GraphInput {
  ad::Tensor<T> x;
  std::vector<std::int32_t> src;
  std::vector<std::int32_t> dst;
  ad::Tensor<T> edge_attr;

  std::size_t num_nodes() const { return x.rows; }

  static GraphInput from(const AssemblyGraph& g) {
    return {g.x.template cast<T>(), g.edge_src, g.edge_dst, g.edge_attr.template cast<T>()};
  }
};

/// Tape handles for one message-passing layer. Unused handles stay invalid.
struct LayerVars {
  ad::Var msg_node;  // H x H block of the message projection acting on h_u
  ad::Var msg_edge;  // 3 x H block acting on e_uv
  ad::Var weight;    // 2H x H (sage) or H x H (gconv)
  ad::Var w_ih, w_hh, lstm_bias;
};

namespace detail {

template <typename T>
ad::Var activation(ad::Tape<T>& t, ad::Var v, T slope) {
  return slope == T(0) ? t.relu(v) : t.leaky_relu(v, slope);
}

/// Parameters enter as leaves when gradients are tracked and as constants otherwise.
template <typename T>
ad::Var param(ad::Tape<T>& t, ad::ParamStore<T>& ps, const std::string& name, bool track) {
  return track ? t.leaf(ps.get(name)) : t.constant(ps.get(name));
}

template <typename T>
ad::Var zeros(ad::Tape<T>& t, std::size_t rows, std::size_t cols) {
  return t.constant(ad::Tensor<T>(rows, cols));
}

inline std::vector<std::size_t> in_degree(const std::vector<std::int32_t>& dst, std::size_t n) {
  std::vector<std::size_t> deg(n, 0);
  for (auto d : dst) ++deg[d];
  return deg;
}

/// LSTM over each node's incoming messages in a seeded random order. Nodes
/// of equal in-degree run as one batch; the final hidden state is the aggregate.
template <typename T>
ad::Var lstm_aggregate(ad::Tape<T>& t, ad::Var messages, const std::vector<std::int32_t>& dst, std::size_t n,
                       const LayerVars& lv, std::uint64_t perm_seed) {
  const std::size_t hidden = t.value(lv.w_hh).rows;
  std::vector<std::vector<std::int32_t>> incoming(n);
  for (std::size_t e = 0; e < dst.size(); ++e) incoming[dst[e]].push_back(static_cast<std::int32_t>(e));
  std::mt19937_64 rng(perm_seed);
  std::map<std::size_t, std::vector<std::int32_t>> buckets;
  for (std::size_t v = 0; v < n; ++v) {
    std::shuffle(incoming[v].begin(), incoming[v].end(), rng);
    if (!incoming[v].empty()) buckets[incoming[v].size()].push_back(static_cast<std::int32_t>(v));
  }
  ad::Var total;
  for (const auto& [deg, nodes] : buckets) {
    ad::Var h = zeros(t, nodes.size(), hidden);
    ad::Var c = zeros(t, nodes.size(), hidden);
    for (std::size_t step = 0; step < deg; ++step) {
      std::vector<std::int32_t> rows;
      rows.reserve(nodes.size());
      for (auto v : nodes) rows.push_back(incoming[v][step]);
      ad::Var x = t.index_select_rows(messages, std::move(rows));
      std::tie(h, c) = ad::lstm_cell_step(t, x, h, c, lv.w_ih, lv.w_hh, lv.lstm_bias);
    }
    ad::Var part = t.scatter_add_rows(h, nodes, n);
    total = total.valid() ? t.add(total, part) : part;
  }
  return total.valid() ? total : zeros(t, n, hidden);
}

}  // namespace detail

/// One message-passing layer. Messages are m_u = [h_u | e_uv] P_e for each
/// in-edge (u, v); a_v aggregates them (mean, LSTM, or symmetric-normalised
/// sum with a self loop for gconv); isolated nodes aggregate to zero.
/// sage: h'_v = act([h_v | a_v] W); gconv: h'_v = act(a_v W). act is ReLU
/// when slope = 0 and leaky ReLU otherwise.
template <typename T>
ad::Var sage_layer(ad::Tape<T>& t, ad::Var h, const GraphInput<T>& g, ad::Var edge_attr, const LayerVars& lv,
                   LayerKind kind, T slope, std::uint64_t perm_seed) {
  const std::size_t n = t.value(h).rows;
  const std::size_t hidden = t.value(lv.weight).cols;
  if (n != g.num_nodes()) throw ShapeError("sage_layer: embedding rows differ from node count");
  ad::Var hm = t.matmul(h, lv.msg_node);
  ad::Var agg;
  if (g.src.empty()) {
    agg = kind == LayerKind::GConv ? hm : detail::zeros(t, n, hidden);  // gconv keeps its self loop
  } else {
    ad::Var m = t.index_select_rows(hm, g.src);
    if (lv.msg_edge.valid()) m = t.add(m, t.matmul(edge_attr, lv.msg_edge));
    const auto deg = detail::in_degree(g.dst, n);
    switch (kind) {
      case LayerKind::SageMean: {
        std::vector<T> inv(n);
        for (std::size_t v = 0; v < n; ++v) inv[v] = deg[v] ? T(1) / T(deg[v]) : T(0);
        agg = t.scale_rows(t.scatter_add_rows(m, g.dst, n), std::move(inv));
        break;
      }
      case LayerKind::SageLstm:
        agg = detail::lstm_aggregate(t, m, g.dst, n, lv, perm_seed);
        break;
      case LayerKind::GConv: {
        std::vector<T> edge_scale(g.src.size()), self_scale(n);
        for (std::size_t e = 0; e < g.src.size(); ++e)
          edge_scale[e] = T(1) / std::sqrt(T(deg[g.src[e]] + 1) * T(deg[g.dst[e]] + 1));
        for (std::size_t v = 0; v < n; ++v) self_scale[v] = T(1) / T(deg[v] + 1);
        agg = t.scatter_add_rows(t.scale_rows(m, std::move(edge_scale)), g.dst, n);
        agg = t.add(agg, t.scale_rows(hm, std::move(self_scale)));
        break;
      }
    }
  }
  if (kind == LayerKind::GConv) return detail::activation(t, t.matmul(agg, lv.weight), slope);
  return detail::activation(t, t.matmul(t.concat_cols({h, agg}), lv.weight), slope);
}

/// Elementwise sum of the given layer embeddings.
template <typename T>
ad::Var jk_aggregate(ad::Tape<T>& t, const std::vector<ad::Var>& layers) {
  if (layers.empty()) throw ShapeError("jk_aggregate: no layers");
  ad::Var out = layers.front();
  for (std::size_t k = 1; k < layers.size(); ++k) out = t.add(out, layers[k]);
  return out;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights seeded by cfg.seed;
/// batch-norm gamma 1, beta 0, running mean 0, running variance 1; PReLU 0.25.
template <typename T>
ad::ParamStore<T> init_params(const ModelConfig& cfg) {
  cfg.validate();
  ad::ParamStore<T> ps;
  std::mt19937_64 rng(cfg.seed);
  const std::size_t H = static_cast<std::size_t>(cfg.hidden);
  auto uniform = [&](const std::string& name, std::size_t rows, std::size_t cols, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    ad::Tensor<T> w(rows, cols);
    for (auto& v : w.data) v = static_cast<T>(dist(rng));
    ps.add(name, std::move(w));
  };
  uniform("input.weight", cfg.input_width, H, cfg.input_width);
  uniform("input.bias", 1, H, cfg.input_width);
  for (int k = 0; k < cfg.num_layers; ++k) {
    const std::string p = "layers." + std::to_string(k) + ".";
    uniform(p + "msg_node", H, H, H + kEdgeWidth);
    if (cfg.edge_features) uniform(p + "msg_edge", kEdgeWidth, H, H + kEdgeWidth);
    if (cfg.kind == LayerKind::GConv) {
      uniform(p + "weight", H, H, H);
    } else {
      uniform(p + "weight", 2 * H, H, 2 * H);
    }
    if (cfg.kind == LayerKind::SageLstm) {
      uniform(p + "lstm.w_ih", H, 4 * H, H);
      uniform(p + "lstm.w_hh", H, 4 * H, H);
      uniform(p + "lstm.bias", 1, 4 * H, H);
    }
  }
  for (int i = 0; i < 2; ++i) {
    const std::string p = "head." + std::to_string(i) + ".";
    uniform(p + "weight", H, H, H);
    uniform(p + "bias", 1, H, H);
    ps.add(p + "bn.gamma", ad::Tensor<T>(1, H, T(1)));
    ps.add(p + "bn.beta", ad::Tensor<T>(1, H, T(0)));
    ps.add(p + "bn.running_mean", ad::Tensor<T>(1, H, T(0)), false);
    ps.add(p + "bn.running_var", ad::Tensor<T>(1, H, T(1)), false);
    ps.add(p + "prelu", ad::Tensor<T>(1, 1, T(0.25)));
  }
  uniform("head.out.weight", H, cfg.num_classes, H);
  uniform("head.out.bias", 1, cfg.num_classes, H);
  return ps;
}

/// Linear -> batch norm -> PReLU, twice, then linear -> softmax.
template <typename T>
ad::Var mlp_head(ad::Tape<T>& t, ad::ParamStore<T>& ps, ad::Var z, bool training, bool track = true) {
  auto P = [&](const std::string& name) { return detail::param(t, ps, name, track); };
  for (int i = 0; i < 2; ++i) {
    const std::string p = "head." + std::to_string(i) + ".";
    z = t.add(t.matmul(z, P(p + "weight")), P(p + "bias"));
    ad::BatchNormBuffers<T> buf{&ps.get(p + "bn.running_mean"), &ps.get(p + "bn.running_var")};
    z = t.batch_norm(z, P(p + "bn.gamma"), P(p + "bn.beta"), buf, training);
    z = t.prelu(z, P(p + "prelu"));
  }
  ad::Var logits = t.add(t.matmul(z, P("head.out.weight")), P("head.out.bias"));
  return t.softmax_rows(logits);
}

template <typename T>
struct ForwardResult {
  ad::Var probs;
  ad::Var jk;
  std::vector<ad::Var> layers;  // h^(0) .. h^(K)
};

/// Input projection, K message-passing layers, JK sum over layers 1..K, head.
/// `training` selects batch statistics in batch norm (and updates the running
/// buffers); `track` records parameters as gradient leaves.
template <typename T>
ForwardResult<T> model_forward(ad::Tape<T>& t, ad::ParamStore<T>& ps, const ModelConfig& cfg,
                               const GraphInput<T>& g, bool training, std::uint64_t perm_seed, bool track = true) {
  auto P = [&](const std::string& name) { return detail::param(t, ps, name, track); };
  if (g.x.cols != cfg.input_width)
    throw SchemaError("graph feature width " + std::to_string(g.x.cols) + " differs from model input width " +
                      std::to_string(cfg.input_width));
  ForwardResult<T> r;
  ad::Var x = t.constant(g.x);
  ad::Var eattr = t.constant(g.edge_attr);
  r.layers.push_back(t.add(t.matmul(x, P("input.weight")), P("input.bias")));
  const T slope = static_cast<T>(cfg.leaky_slope);
  for (int k = 0; k < cfg.num_layers; ++k) {
    const std::string p = "layers." + std::to_string(k) + ".";
    LayerVars lv;
    lv.msg_node = P(p + "msg_node");
    if (cfg.edge_features) lv.msg_edge = P(p + "msg_edge");
    lv.weight = P(p + "weight");
    if (cfg.kind == LayerKind::SageLstm) {
      lv.w_ih = P(p + "lstm.w_ih");
      lv.w_hh = P(p + "lstm.w_hh");
      lv.lstm_bias = P(p + "lstm.bias");
    }
    r.layers.push_back(sage_layer(t, r.layers.back(), g, eattr, lv, cfg.kind, slope, mix_seed(perm_seed, k)));
  }
  r.jk = jk_aggregate(t, std::vector<ad::Var>(r.layers.begin() + 1, r.layers.end()));
  r.probs = mlp_head(t, ps, r.jk, training, track);
  return r;
}

/// Eval-mode class probabilities as a plain tensor. Reads the parameters
/// only, so concurrent calls on one store are safe.
template <typename T>
ad::Tensor<T> predict_probs(const ad::ParamStore<T>& ps, const ModelConfig& cfg, const GraphInput<T>& g) {
  ad::Tape<T> tape;
  auto r = model_forward(tape, const_cast<ad::ParamStore<T>&>(ps), cfg, g, false, cfg.seed, false);
  return tape.value(r.probs);
}

}  // namespace matgraph
