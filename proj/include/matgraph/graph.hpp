#pragma once

// Attributed multigraphs built from encoded assemblies, the corpus discard
// rule, and the protocol augmentations (ablations, context labels, tiers).

#include <cstdint>
#include <string>
#include <vector>

#include "matgraph/features.hpp"
#include "matgraph/ingest.hpp"
#include "matgraph/json.hpp"
#include "matgraph/tensor.hpp"

namespace matgraph {

struct AssemblyGraph {
  std::string graph_id;
  std::vector<std::string> node_ids;
  ad::Tensor<float> x;  // |V| x d_x
  std::vector<std::int32_t> edge_src;
  std::vector<std::int32_t> edge_dst;
  ad::Tensor<float> edge_attr;  // |E| x 3
  std::vector<std::int32_t> y;
  std::vector<std::uint8_t> target_mask;
  std::vector<std::string> material_ids;  // resolved ground truth, used for tier features
  FeatureSchema schema;

  std::size_t num_nodes() const { return node_ids.size(); }
  std::size_t num_edges() const { return edge_src.size(); }
  /// Throws SchemaError when array lengths or indices disagree.
  void check() const;
  bool operator==(const AssemblyGraph& o) const;
};

/// Encodes each body into a node row and each connection into two directed edges.
AssemblyGraph build_graph(const std::string& graph_id, const std::vector<BodyRecord>& bodies,
                          const std::vector<ConnectionRecord>& connections, const AssemblyMeta& meta,
                          const FeatureEncoder& encoder);

struct Validation {
  bool keep = true;
  std::string reason;
};

/// Corpus discard rule: keep iff |V| >= 3 and at least 2 undirected connections.
Validation validate_graph(const AssemblyGraph& g);

/// Removes a node-feature block. "SemanticNames" removes both name blocks.
AssemblyGraph apply_node_ablation(const AssemblyGraph& g, const std::string& block_name);

/// Removes every directed edge of the given kind.
AssemblyGraph apply_edge_ablation(const AssemblyGraph& g, ConnectionKind kind);

/// Appends a zero material one-hot block of width `num_classes` (fully guided input).
AssemblyGraph add_material_block(const AssemblyGraph& g, std::size_t num_classes);

/// Marks ceil(ratio * |V|) nodes, sampled without replacement, as context.
/// Context rows get their ground-truth one-hot unless `reveal` is false;
/// target rows get zeros. target_mask is true exactly on targets.
AssemblyGraph inject_context_labels(const AssemblyGraph& g, double ratio, std::uint64_t seed, bool reveal = true);

/// Sets the material block from explicit per-node labels (-1 = unknown).
/// Nodes with a label become context nodes.
AssemblyGraph set_known_labels(const AssemblyGraph& g, const std::vector<std::int32_t>& labels);

/// Appends a tier block for depth 1..3 filled from each node's ground truth.
/// Depth 0 returns the graph unchanged.
AssemblyGraph inject_tier_features(const AssemblyGraph& g, int depth, const MaterialCatalog& catalog,
                                   const TierVocabulary& tiers);

/// Disjoint union; node and edge indices of later graphs are offset.
AssemblyGraph merge_graphs(const std::vector<const AssemblyGraph*>& graphs);

json graph_to_json(const AssemblyGraph& g);
AssemblyGraph graph_from_json(const json& doc);

}  // namespace matgraph
