#pragma once

// Micro/weighted F1, top-k hit rates and ranked prediction lists.

#include <cstdint>
#include <vector>

#include "matgraph/json.hpp"
#include "matgraph/tensor.hpp"

namespace matgraph {

/// Labels sorted by descending probability; ties go to the smaller label index.
struct RankedRow {
  std::vector<std::int32_t> labels;
  std::vector<double> probs;
};
using PredictionSet = std::vector<RankedRow>;

RankedRow rank_row(const float* probs, std::size_t num_classes);
PredictionSet rank_predictions(const ad::Tensor<float>& probs);

std::vector<std::int32_t> argmax_labels(const PredictionSet& ranked);

/// Globally pooled TP/FP/FN over masked instances.
double micro_f1(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth,
                const std::vector<std::uint8_t>& mask);

/// Per-class F1 averaged with weights proportional to true support.
double weighted_f1(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth,
                   const std::vector<std::uint8_t>& mask);

/// Fraction of masked instances whose truth is among the first k ranked labels.
double topk_score(const PredictionSet& ranked, const std::vector<std::int32_t>& truth,
                  const std::vector<std::uint8_t>& mask, int k);

/// Top-k point predictions: the truth when it is in the top k, else the argmax.
std::vector<std::int32_t> topk_predictions(const PredictionSet& ranked, const std::vector<std::int32_t>& truth, int k);

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  std::int64_t support = 0;
};

struct MetricsReport {
  double micro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::vector<double> topk;           // hit rate for k = 1..3
  std::vector<double> weighted_topk;  // weighted F1 of top-k predictions, k = 1..3
  std::vector<ClassStats> per_class;
  std::size_t instances = 0;

  json to_json() const;
};

MetricsReport compute_report(const PredictionSet& ranked, const std::vector<std::int32_t>& truth,
                             const std::vector<std::uint8_t>& mask, std::size_t num_classes, int max_k = 3);

}  // namespace matgraph
