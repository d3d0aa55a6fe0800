#include "matgraph/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "matgraph/errors.hpp"

namespace matgraph {

namespace {

std::size_t check_inputs(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth,
                         const std::vector<std::uint8_t>& mask) {
  if (pred.size() != truth.size() || mask.size() != truth.size())
    throw MetricError("prediction, truth and mask lengths differ");
  const std::size_t n = static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
  if (n == 0) throw MetricError("empty evaluation mask");
  return n;
}

struct Counts {
  std::int64_t tp = 0, fp = 0, fn = 0;
};

std::map<std::int32_t, Counts> confusion(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth,
                                         const std::vector<std::uint8_t>& mask) {
  std::map<std::int32_t, Counts> c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!mask[i]) continue;
    if (pred[i] == truth[i]) {
      ++c[truth[i]].tp;
    } else {
      ++c[pred[i]].fp;
      ++c[truth[i]].fn;
    }
  }
  return c;
}

double f1(const Counts& c) {
  const double den = 2.0 * c.tp + c.fp + c.fn;
  return den > 0 ? 2.0 * c.tp / den : 0.0;
}

}  // namespace

RankedRow rank_row(const float* probs, std::size_t num_classes) {
  RankedRow r;
  r.labels.resize(num_classes);
  std::iota(r.labels.begin(), r.labels.end(), 0);
  std::stable_sort(r.labels.begin(), r.labels.end(), [&](std::int32_t a, std::int32_t b) { return probs[a] > probs[b]; });
  for (auto l : r.labels) r.probs.push_back(probs[l]);
  return r;
}

PredictionSet rank_predictions(const ad::Tensor<float>& probs) {
  PredictionSet out;
  out.reserve(probs.rows);
  for (std::size_t r = 0; r < probs.rows; ++r) out.push_back(rank_row(probs.row(r), probs.cols));
  return out;
}

std::vector<std::int32_t> argmax_labels(const PredictionSet& ranked) {
  std::vector<std::int32_t> out;
  for (const auto& r : ranked) out.push_back(r.labels.empty() ? -1 : r.labels.front());
  return out;
}

double micro_f1(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth,
                const std::vector<std::uint8_t>& mask) {
  check_inputs(pred, truth, mask);
  Counts pooled;
  for (const auto& [label, c] : confusion(pred, truth, mask)) {
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
  }
  return f1(pooled);
}

double weighted_f1(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth,
                   const std::vector<std::uint8_t>& mask) {
  const std::size_t n = check_inputs(pred, truth, mask);
  double acc = 0.0;
  for (const auto& [label, c] : confusion(pred, truth, mask)) {
    const std::int64_t support = c.tp + c.fn;
    if (support > 0) acc += f1(c) * static_cast<double>(support);
  }
  return acc / static_cast<double>(n);
}

double topk_score(const PredictionSet& ranked, const std::vector<std::int32_t>& truth,
                  const std::vector<std::uint8_t>& mask, int k) {
  if (ranked.size() != truth.size() || mask.size() != truth.size())
    throw MetricError("prediction, truth and mask lengths differ");
  std::size_t n = 0, hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!mask[i]) continue;
    const auto& labels = ranked[i].labels;
    if (k < 1 || static_cast<std::size_t>(k) > labels.size()) throw MetricError("k outside 1..C");
    ++n;
    if (std::find(labels.begin(), labels.begin() + k, truth[i]) != labels.begin() + k) ++hits;
  }
  if (n == 0) throw MetricError("empty evaluation mask");
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<std::int32_t> topk_predictions(const PredictionSet& ranked, const std::vector<std::int32_t>& truth, int k) {
  std::vector<std::int32_t> out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& labels = ranked[i].labels;
    if (k < 1 || static_cast<std::size_t>(k) > labels.size()) throw MetricError("k outside 1..C");
    const bool hit = std::find(labels.begin(), labels.begin() + k, truth[i]) != labels.begin() + k;
    out[i] = hit ? truth[i] : labels.front();
  }
  return out;
}

json MetricsReport::to_json() const {
  json classes = json::array();
  for (const auto& c : per_class)
    classes.push_back({{"precision", c.precision}, {"recall", c.recall}, {"support", c.support}});
  return {{"micro_f1", micro_f1},       {"weighted_f1", weighted_f1}, {"topk", topk},
          {"weighted_topk", weighted_topk}, {"instances", instances},     {"per_class", std::move(classes)}};
}

MetricsReport compute_report(const PredictionSet& ranked, const std::vector<std::int32_t>& truth,
                             const std::vector<std::uint8_t>& mask, std::size_t num_classes, int max_k) {
  MetricsReport r;
  const auto pred = argmax_labels(ranked);
  r.instances = check_inputs(pred, truth, mask);
  r.micro_f1 = micro_f1(pred, truth, mask);
  r.weighted_f1 = weighted_f1(pred, truth, mask);
  const int kmax = std::min<int>(max_k, static_cast<int>(num_classes));
  for (int k = 1; k <= kmax; ++k) {
    r.topk.push_back(topk_score(ranked, truth, mask, k));
    r.weighted_topk.push_back(weighted_f1(topk_predictions(ranked, truth, k), truth, mask));
  }
  r.per_class.resize(num_classes);
  const auto conf = confusion(pred, truth, mask);
  for (const auto& [label, c] : conf) {
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) continue;
    auto& s = r.per_class[label];
    s.support = c.tp + c.fn;
    s.precision = c.tp + c.fp > 0 ? double(c.tp) / double(c.tp + c.fp) : 0.0;
    s.recall = s.support > 0 ? double(c.tp) / double(s.support) : 0.0;
  }
  return r;
}

}  // namespace matgraph
