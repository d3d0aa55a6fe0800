#pragma once

// Supervised node-classification training, repeated runs and grid search.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "matgraph/graph.hpp"
#include "matgraph/json.hpp"
#include "matgraph/metrics.hpp"
#include "matgraph/model.hpp"
#include "matgraph/optim.hpp"
#include "matgraph/util.hpp"

namespace matgraph {

enum class WeightMode { InverseFrequency, Uniform };
const char* to_string(WeightMode mode);
WeightMode weight_mode_from_string(std::string_view name);

struct TrainConfig {
  int epochs = 100;
  int patience = 20;
  int batch_graphs = 8;
  double lr = 1e-3;
  WeightMode weight_mode = WeightMode::InverseFrequency;
  int runs = 10;

  void validate() const;
  json to_json() const;
  static TrainConfig from_json(const json& doc);
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_micro_f1 = 0.0;
  double lr = 0.0;
};

struct RunHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_micro_f1 = -1.0;
  double wall_seconds = 0.0;

  /// `epoch,train_loss,val_micro_f1,lr`
  std::string to_csv() const;
  json summary() const;
};

/// w_c proportional to 1 / max(count_c, 1), rescaled to mean 1; all ones in uniform mode.
std::vector<double> class_weights(const std::vector<std::int64_t>& counts, WeightMode mode);

/// Label counts over target nodes.
std::vector<std::int64_t> target_label_counts(const std::vector<const AssemblyGraph*>& graphs, std::size_t num_classes);

struct TrainResult {
  ModelConfig model;
  ad::ParamStore<float> params;  // parameters at the best validation epoch
  RunHistory history;
};

/// Trains from init_params(model with seed = `seed`). Throws ConfigError on an empty training set.
TrainResult train(ModelConfig model, const TrainConfig& cfg, const std::vector<const AssemblyGraph*>& train_graphs,
                  const std::vector<const AssemblyGraph*>& val_graphs, std::uint64_t seed);

/// Ranked predictions, labels and target mask concatenated over graphs.
struct Evaluation {
  PredictionSet ranked;
  std::vector<std::int32_t> truth;
  std::vector<std::uint8_t> mask;
};

Evaluation evaluate(const ad::ParamStore<float>& params, const ModelConfig& model,
                    const std::vector<const AssemblyGraph*>& graphs);

/// Micro-F1 of argmax predictions over target nodes; 0 when there are none.
double target_micro_f1(const Evaluation& e);

// ---- repeated runs and reporting ----------------------------------------

struct MetricValue {
  std::string metric;
  int k = 0;  // 0 when not a top-k metric
  double value = 0.0;
};
using RunMetrics = std::vector<MetricValue>;

struct AggregateMetric {
  std::string metric;
  int k = 0;
  MeanStd stats;
};

struct MultiRunResult {
  std::vector<std::uint64_t> seeds;
  std::vector<RunMetrics> runs;
  std::vector<AggregateMetric> aggregate;  // in first-run metric order

  const AggregateMetric& get(const std::string& metric, int k = 0) const;
};

/// Runs `body` for seeds seed0 .. seed0 + n - 1 (concurrently with jobs > 1)
/// and aggregates with the population standard deviation.
MultiRunResult multi_run(int n, std::uint64_t seed0, int jobs,
                         const std::function<RunMetrics(std::uint64_t seed, int run)>& body);

inline constexpr const char* kMetricsCsvHeader = "experiment,run,seed,split,metric,k,value";

/// Per-run rows followed by `mean` and `std` rows.
std::string metrics_csv_rows(const std::string& experiment, const std::string& split, const MultiRunResult& r);

struct GridRow {
  ModelConfig model;
  MeanStd val_micro_f1;
};

/// Trains every (layers, hidden, kind) cell and ranks by mean validation micro-F1.
std::vector<GridRow> grid_search(const ModelConfig& base, const std::vector<int>& layers,
                                 const std::vector<int>& hidden, const std::vector<LayerKind>& kinds,
                                 const TrainConfig& cfg, const std::vector<const AssemblyGraph*>& train_graphs,
                                 const std::vector<const AssemblyGraph*>& val_graphs, std::uint64_t seed0, int jobs);

}  // namespace matgraph
