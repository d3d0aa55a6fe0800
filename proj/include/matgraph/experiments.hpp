#pragma once

// The four evaluation protocols (fully, partially and user guided, feature
// ablation) plus corpus statistics. Each protocol returns its result files
// as strings so callers decide where they go.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "matgraph/corpus.hpp"
#include "matgraph/json.hpp"
#include "matgraph/model.hpp"
#include "matgraph/training.hpp"

namespace matgraph {

struct ExperimentOptions {
  ModelConfig model;  // input width and class count are filled in per protocol
  TrainConfig train;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string corpus_path;  // recorded in the manifest only
  std::string output_dir;   // recorded in the manifest only

  std::vector<double> ratios{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<int> layers{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> depths{0, 1, 2, 3};
  std::vector<int> ks{1, 2, 3};
  std::vector<std::string> blocks{"SemanticNames", "body_physical", "occurrence_physical", "body_geometry", "global"};
  std::vector<std::string> edge_modes{"none", "Hierarchical"};  // "none" or a connection kind
  bool reveal_context = true;  // false: context rows keep a zero label block

  json manifest(const std::string& protocol) const;
};

struct ExperimentOutput {
  std::string protocol;
  json manifest;
  json report;
  std::string metrics_csv;  // header plus rows
  std::string table_md;
  std::string plot_csv;
};

/// Writes manifest.json, report.json, metrics.csv, table.md and plot.csv.
void write_experiment(const std::filesystem::path& dir, const ExperimentOutput& out);

ExperimentOutput run_fully_guided(const Corpus& corpus, const ExperimentOptions& opt);
/// A ratio of 0 runs the fully guided input on the same grid.
ExperimentOutput run_partial_guided(const Corpus& corpus, const ExperimentOptions& opt);
ExperimentOutput run_user_guided(const Corpus& corpus, const ExperimentOptions& opt);
ExperimentOutput run_feature_ablation(const Corpus& corpus, const ExperimentOptions& opt);

/// Seed of the context sample for one graph in one run.
std::uint64_t context_seed(std::uint64_t run_seed, const std::string& graph_id);

/// Graph inputs for a protocol cell, built from the corpus graphs.
std::vector<AssemblyGraph> with_context(const std::vector<const AssemblyGraph*>& graphs, std::size_t num_classes,
                                        double ratio, std::uint64_t run_seed, bool reveal);
std::vector<AssemblyGraph> with_tiers(const std::vector<const AssemblyGraph*>& graphs, int depth,
                                      const FittedState& state);
std::vector<const AssemblyGraph*> pointers(const std::vector<AssemblyGraph>& graphs);

/// Input augmentation for a single training run, recorded in checkpoints so
/// evaluation and serving rebuild the same layout.
struct InputProtocol {
  double context_ratio = 0.0;  // 0: no material block
  bool reveal_context = true;
  int tier_depth = 0;
  std::vector<std::string> ablate_blocks;
  std::string ablate_edges = "none";

  void validate() const;
  json to_json() const;
  static InputProtocol from_json(const json& doc);

  /// Augmented copies of `graphs`; graphs that fail the discard rule after
  /// an edge ablation are left out.
  std::vector<AssemblyGraph> apply(const std::vector<const AssemblyGraph*>& graphs, const FittedState& state,
                                   std::uint64_t run_seed) const;
};

// ---- corpus statistics ----------------------------------------------------

struct CountStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t min = 0;
  std::size_t max = 0;
  std::vector<std::pair<std::size_t, std::size_t>> histogram;  // (value, graphs), ascending
};

CountStats count_stats(const std::vector<std::size_t>& values);

struct DatasetStats {
  std::size_t graphs = 0;
  std::size_t nodes = 0;
  std::size_t edges = 0;  // directed
  CountStats node_counts;
  CountStats edge_counts;  // directed edges per graph
  std::array<std::size_t, kConnectionKinds> edge_kinds{};  // directed, by kind
  std::vector<std::pair<std::string, std::size_t>> labels;  // class name, node count

  json to_json() const;
  std::string to_markdown() const;
};

DatasetStats dataset_stats(const Corpus& corpus);
DatasetStats dataset_stats(const std::vector<const AssemblyGraph*>& graphs, const LabelVocabulary& labels);

}  // namespace matgraph
