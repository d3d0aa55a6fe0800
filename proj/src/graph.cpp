#include "matgraph/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>

#include "matgraph/errors.hpp"
#include "matgraph/util.hpp"

namespace matgraph {

namespace {

using FTensor = ad::Tensor<float>;

FTensor drop_columns(const FTensor& x, std::size_t begin, std::size_t width) {
  FTensor out(x.rows, x.cols - width);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const float* src = x.row(r);
    float* dst = out.row(r);
    std::copy(src, src + begin, dst);
    std::copy(src + begin + width, src + x.cols, dst + begin);
  }
  return out;
}

FTensor append_columns(const FTensor& x, const FTensor& extra) {
  FTensor out(x.rows, x.cols + extra.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    std::copy(x.row(r), x.row(r) + x.cols, out.row(r));
    std::copy(extra.row(r), extra.row(r) + extra.cols, out.row(r) + x.cols);
  }
  return out;
}

const FeatureBlock& require_block(const FeatureSchema& s, const char* name) {
  const FeatureBlock* b = s.find(name);
  if (!b) throw ConfigError(std::string("graph has no '") + name + "' block");
  return *b;
}

// Floats are written through their shortest decimal form so bundles stay
// compact and reload to the identical bit pattern.
double shortest(float v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  double d = 0.0;
  std::from_chars(buf, end, d);
  return d;
}

json floats_to_json(const std::vector<float>& values) {
  json arr = json::array();
  for (float v : values) arr.push_back(shortest(v));
  return arr;
}

std::vector<float> floats_from_json(const json& arr) {
  std::vector<float> out;
  out.reserve(arr.size());
  for (const auto& v : arr) out.push_back(static_cast<float>(v.get<double>()));
  return out;
}

}  // namespace

void AssemblyGraph::check() const {
  const std::size_t n = num_nodes();
  if (x.rows != n || y.size() != n || target_mask.size() != n || material_ids.size() != n)
    throw SchemaError("graph " + graph_id + ": per-node arrays disagree with node count");
  if (x.cols != schema.node_width()) throw SchemaError("graph " + graph_id + ": feature width differs from schema");
  if (edge_dst.size() != edge_src.size() || edge_attr.rows != edge_src.size() || edge_attr.cols != kEdgeWidth)
    throw SchemaError("graph " + graph_id + ": edge arrays disagree");
  for (std::size_t e = 0; e < edge_src.size(); ++e)
    if (edge_src[e] < 0 || edge_dst[e] < 0 || std::size_t(edge_src[e]) >= n || std::size_t(edge_dst[e]) >= n)
      throw SchemaError("graph " + graph_id + ": edge index out of range");
}

bool AssemblyGraph::operator==(const AssemblyGraph& o) const {
  return graph_id == o.graph_id && node_ids == o.node_ids && x.rows == o.x.rows && x.cols == o.x.cols &&
         x.data == o.x.data && edge_src == o.edge_src && edge_dst == o.edge_dst && edge_attr.data == o.edge_attr.data &&
         y == o.y && target_mask == o.target_mask && material_ids == o.material_ids && schema == o.schema;
}

AssemblyGraph build_graph(const std::string& graph_id, const std::vector<BodyRecord>& bodies,
                          const std::vector<ConnectionRecord>& connections, const AssemblyMeta& meta,
                          const FeatureEncoder& encoder) {
  const FittedState& st = encoder.state();
  AssemblyGraph g;
  g.graph_id = graph_id;
  g.schema = encoder.base_schema();
  const std::size_t width = g.schema.node_width();
  g.x = FTensor(bodies.size(), width);
  const std::vector<float> global_row = encoder.encode_global_row(meta);

  std::map<std::string, std::int32_t> index;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const BodyRecord& b = bodies[i];
    const std::vector<float> row = encoder.encode_body(b, global_row);
    if (row.size() != width)
      throw SchemaError("encoder produced " + std::to_string(row.size()) + " features, schema expects " +
                        std::to_string(width));
    std::copy(row.begin(), row.end(), g.x.row(i));
    g.node_ids.push_back(b.uuid);
    const ResolvedMaterial m = resolve_material(b, st.catalog);
    g.material_ids.push_back(m.material_id);
    g.y.push_back(st.labels.index_of(m.material_id));
    g.target_mask.push_back(1);
    index[b.uuid] = static_cast<std::int32_t>(i);
  }

  std::vector<float> attr;
  for (const auto& c : connections) {
    auto s = index.find(c.src), d = index.find(c.dst);
    if (s == index.end() || d == index.end()) throw SchemaError("connection endpoint is not a node of " + graph_id);
    const auto onehot = encode_connection(c.kind);
    for (auto [u, v] : {std::pair{s->second, d->second}, std::pair{d->second, s->second}}) {
      g.edge_src.push_back(u);
      g.edge_dst.push_back(v);
      attr.insert(attr.end(), onehot.begin(), onehot.end());
    }
  }
  g.edge_attr = FTensor(g.edge_src.size(), kEdgeWidth, std::move(attr));
  return g;
}

Validation validate_graph(const AssemblyGraph& g) {
  if (g.num_nodes() < 3) return {false, "too few nodes"};
  if (g.num_edges() / 2 < 2) return {false, "too few edges"};
  return {true, {}};
}

AssemblyGraph apply_node_ablation(const AssemblyGraph& g, const std::string& block_name) {
  if (block_name == block::kSemanticNames) {
    return apply_node_ablation(apply_node_ablation(g, block::kBodyName), block::kOccurrenceName);
  }
  const FeatureBlock* b = g.schema.find(block_name);
  if (!b) throw ConfigError("unknown feature block '" + block_name + "'");
  if (!b->ablatable) throw ConfigError("feature block '" + block_name + "' cannot be ablated");
  AssemblyGraph out = g;
  out.x = drop_columns(g.x, b->offset, b->width);
  out.schema.remove(block_name);
  return out;
}

AssemblyGraph apply_edge_ablation(const AssemblyGraph& g, ConnectionKind kind) {
  AssemblyGraph out = g;
  out.edge_src.clear();
  out.edge_dst.clear();
  std::vector<float> attr;
  const std::size_t col = static_cast<std::size_t>(kind);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    if (g.edge_attr.at(e, col) == 1.0f) continue;
    out.edge_src.push_back(g.edge_src[e]);
    out.edge_dst.push_back(g.edge_dst[e]);
    attr.insert(attr.end(), g.edge_attr.row(e), g.edge_attr.row(e) + kEdgeWidth);
  }
  out.edge_attr = FTensor(out.edge_src.size(), kEdgeWidth, std::move(attr));
  return out;
}

AssemblyGraph add_material_block(const AssemblyGraph& g, std::size_t num_classes) {
  if (g.schema.has(block::kMaterialOnehot)) throw SchemaError("graph already has a material block");
  AssemblyGraph out = g;
  out.x = append_columns(g.x, FTensor(g.num_nodes(), num_classes));
  out.schema.append(block::kMaterialOnehot, num_classes, false);
  return out;
}

AssemblyGraph set_known_labels(const AssemblyGraph& g, const std::vector<std::int32_t>& labels) {
  const FeatureBlock& b = require_block(g.schema, block::kMaterialOnehot);
  if (labels.size() != g.num_nodes()) throw ConfigError("one label slot per node required");
  AssemblyGraph out = g;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    float* row = out.x.row(i) + b.offset;
    std::fill(row, row + b.width, 0.0f);
    out.target_mask[i] = labels[i] < 0 ? 1 : 0;
    if (labels[i] >= 0) {
      if (std::size_t(labels[i]) >= b.width) throw ConfigError("known label outside the material block");
      row[labels[i]] = 1.0f;
    }
  }
  return out;
}

AssemblyGraph inject_context_labels(const AssemblyGraph& g, double ratio, std::uint64_t seed, bool reveal) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("context ratio must lie strictly between 0 and 1");
  require_block(g.schema, block::kMaterialOnehot);
  const std::size_t n = g.num_nodes();
  // Integer ceiling on a rounded product avoids 0.3 * 10 landing at 3.0000000000000004.
  const double prod = std::round(ratio * double(n) * 1e9) / 1e9;
  const std::size_t n_context = std::min(n, static_cast<std::size_t>(std::ceil(prod)));
  std::vector<std::int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::int32_t> known(n, -1);
  for (std::size_t i = 0; i < n_context; ++i) known[order[i]] = g.y[order[i]];
  AssemblyGraph out = set_known_labels(g, known);
  if (!reveal) {
    const FeatureBlock& b = *out.schema.find(block::kMaterialOnehot);
    for (std::size_t i = 0; i < n; ++i) std::fill(out.x.row(i) + b.offset, out.x.row(i) + b.offset + b.width, 0.0f);
  }
  return out;
}

AssemblyGraph inject_tier_features(const AssemblyGraph& g, int depth, const MaterialCatalog& catalog,
                                   const TierVocabulary& tiers) {
  if (depth < 0 || depth > 3) throw ConfigError("tier depth must be in 0..3");
  if (depth == 0) return g;
  if (g.schema.has(block::kTierOnehot)) throw SchemaError("graph already has a tier block");
  FTensor block(g.num_nodes(), tiers.width(depth));
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const auto row = encode_tier(g.material_ids[i], catalog, tiers, depth);
    std::copy(row.begin(), row.end(), block.row(i));
  }
  AssemblyGraph out = g;
  out.x = append_columns(g.x, block);
  out.schema.append(block::kTierOnehot, block.cols, false);
  return out;
}

AssemblyGraph merge_graphs(const std::vector<const AssemblyGraph*>& graphs) {
  if (graphs.empty()) throw ConfigError("merge_graphs: no graphs");
  AssemblyGraph out;
  out.graph_id = "batch";
  out.schema = graphs.front()->schema;
  std::size_t n = 0, e = 0;
  for (const auto* g : graphs) {
    if (!(g->schema == out.schema)) throw SchemaError("merge_graphs: schemas differ");
    n += g->num_nodes();
    e += g->num_edges();
  }
  const std::size_t width = out.schema.node_width();
  out.x = FTensor(n, width);
  out.edge_attr = FTensor(e, kEdgeWidth);
  std::size_t node_off = 0, edge_off = 0;
  for (const auto* g : graphs) {
    std::copy(g->x.data.begin(), g->x.data.end(), out.x.data.begin() + node_off * width);
    std::copy(g->edge_attr.data.begin(), g->edge_attr.data.end(), out.edge_attr.data.begin() + edge_off * kEdgeWidth);
    for (std::size_t k = 0; k < g->num_edges(); ++k) {
      out.edge_src.push_back(g->edge_src[k] + static_cast<std::int32_t>(node_off));
      out.edge_dst.push_back(g->edge_dst[k] + static_cast<std::int32_t>(node_off));
    }
    out.node_ids.insert(out.node_ids.end(), g->node_ids.begin(), g->node_ids.end());
    out.y.insert(out.y.end(), g->y.begin(), g->y.end());
    out.target_mask.insert(out.target_mask.end(), g->target_mask.begin(), g->target_mask.end());
    out.material_ids.insert(out.material_ids.end(), g->material_ids.begin(), g->material_ids.end());
    node_off += g->num_nodes();
    edge_off += g->num_edges();
  }
  return out;
}

json graph_to_json(const AssemblyGraph& g) {
  json mask = json::array();
  for (auto m : g.target_mask) mask.push_back(m != 0);
  return {
      {"graph_id", g.graph_id},
      {"schema", g.schema.to_json()},
      {"x", {{"shape", {g.x.rows, g.x.cols}}, {"data", floats_to_json(g.x.data)}}},
      {"edge_index", {g.edge_src, g.edge_dst}},
      {"edge_attr", floats_to_json(g.edge_attr.data)},
      {"y", g.y},
      {"node_ids", g.node_ids},
      {"target_mask", std::move(mask)},
      {"material_ids", g.material_ids},
  };
}

AssemblyGraph graph_from_json(const json& d) {
  AssemblyGraph g;
  try {
    g.graph_id = d.at("graph_id").get<std::string>();
    g.schema = FeatureSchema::from_json(d.at("schema"));
    const auto& shape = d.at("x").at("shape");
    g.x = FTensor(shape.at(0).get<std::size_t>(), shape.at(1).get<std::size_t>(), floats_from_json(d.at("x").at("data")));
    g.edge_src = d.at("edge_index").at(0).get<std::vector<std::int32_t>>();
    g.edge_dst = d.at("edge_index").at(1).get<std::vector<std::int32_t>>();
    std::vector<float> attr = floats_from_json(d.at("edge_attr"));
    if (attr.size() != g.edge_src.size() * kEdgeWidth) throw SchemaError("edge_attr length differs from edge count");
    g.edge_attr = FTensor(g.edge_src.size(), kEdgeWidth, std::move(attr));
    g.y = d.at("y").get<std::vector<std::int32_t>>();
    g.node_ids = d.at("node_ids").get<std::vector<std::string>>();
    if (d.contains("target_mask")) {
      for (const auto& m : d["target_mask"]) g.target_mask.push_back(m.get<bool>() ? 1 : 0);
    } else {
      g.target_mask.assign(g.node_ids.size(), 1);
    }
    if (d.contains("material_ids")) {
      g.material_ids = d["material_ids"].get<std::vector<std::string>>();
    } else {
      g.material_ids.assign(g.node_ids.size(), "");
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("invalid graph bundle: ") + e.what());
  } catch (const ShapeError& e) {
    throw SchemaError(std::string("invalid graph bundle: ") + e.what());
  }
  g.check();
  return g;
}

}  // namespace matgraph
