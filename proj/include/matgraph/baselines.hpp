#pragma once

// Reference predictors: modal class, softmax regression on node features,
// and softmax regression restricted to the geometry block.

#include <cstdint>
#include <vector>

#include "matgraph/graph.hpp"
#include "matgraph/metrics.hpp"
#include "matgraph/tensor.hpp"
#include "matgraph/training.hpp"

namespace matgraph {

/// Every node gets the same ranking: classes by descending training count.
struct MajorityBaseline {
  std::vector<std::int32_t> ranking;
  static MajorityBaseline fit(const std::vector<const AssemblyGraph*>& train, std::size_t num_classes);
  std::int32_t mode() const { return ranking.front(); }
  Evaluation evaluate(const std::vector<const AssemblyGraph*>& graphs) const;
};

struct LinearSoftmaxOptions {
  int epochs = 200;
  double lr = 0.01;
  WeightMode weight_mode = WeightMode::InverseFrequency;
  std::uint64_t seed = 0;
};

/// One linear layer plus softmax over a contiguous column range of X.
struct LinearSoftmax {
  std::size_t col_begin = 0;
  std::size_t col_width = 0;
  ad::Tensor<float> weight;  // width x C
  ad::Tensor<float> bias;    // 1 x C

  static LinearSoftmax fit(const std::vector<const AssemblyGraph*>& train, std::size_t num_classes,
                           std::size_t col_begin, std::size_t col_width, const LinearSoftmaxOptions& opt);
  /// Full node-feature baseline.
  static LinearSoftmax fit_full(const std::vector<const AssemblyGraph*>& train, std::size_t num_classes,
                                const LinearSoftmaxOptions& opt);
  /// Geometry-block baseline (stand-in for an image-based classifier).
  static LinearSoftmax fit_visual(const std::vector<const AssemblyGraph*>& train, std::size_t num_classes,
                                  const LinearSoftmaxOptions& opt);

  ad::Tensor<float> predict(const AssemblyGraph& g) const;
  Evaluation evaluate(const std::vector<const AssemblyGraph*>& graphs) const;
};

}  // namespace matgraph
