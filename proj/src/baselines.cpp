#include "matgraph/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "matgraph/errors.hpp"
#include "matgraph/optim.hpp"

namespace matgraph {

namespace {

void append(Evaluation& e, PredictionSet ranked, const AssemblyGraph& g) {
  e.ranked.insert(e.ranked.end(), std::make_move_iterator(ranked.begin()), std::make_move_iterator(ranked.end()));
  e.truth.insert(e.truth.end(), g.y.begin(), g.y.end());
  e.mask.insert(e.mask.end(), g.target_mask.begin(), g.target_mask.end());
}

ad::Tensor<float> slice(const ad::Tensor<float>& x, std::size_t begin, std::size_t width) {
  ad::Tensor<float> out(x.rows, width);
  for (std::size_t r = 0; r < x.rows; ++r) std::copy(x.row(r) + begin, x.row(r) + begin + width, out.row(r));
  return out;
}

}  // namespace

MajorityBaseline MajorityBaseline::fit(const std::vector<const AssemblyGraph*>& train, std::size_t num_classes) {
  const auto counts = target_label_counts(train, num_classes);
  MajorityBaseline m;
  m.ranking.resize(num_classes);
  std::iota(m.ranking.begin(), m.ranking.end(), 0);
  std::stable_sort(m.ranking.begin(), m.ranking.end(), [&](auto a, auto b) { return counts[a] > counts[b]; });
  return m;
}

Evaluation MajorityBaseline::evaluate(const std::vector<const AssemblyGraph*>& graphs) const {
  Evaluation e;
  RankedRow row;
  row.labels = ranking;
  row.probs.assign(ranking.size(), 0.0);
  if (!ranking.empty()) row.probs[0] = 1.0;
  for (const auto* g : graphs) append(e, PredictionSet(g->num_nodes(), row), *g);
  return e;
}

LinearSoftmax LinearSoftmax::fit(const std::vector<const AssemblyGraph*>& train, std::size_t num_classes,
                                 std::size_t col_begin, std::size_t col_width, const LinearSoftmaxOptions& opt) {
  if (train.empty()) throw ConfigError("empty training split");
  // Stack the target rows of every training graph into one design matrix.
  std::vector<float> rows;
  std::vector<std::int32_t> labels;
  for (const auto* g : train) {
    if (col_begin + col_width > g->x.cols) throw SchemaError("baseline column range exceeds features");
    for (std::size_t i = 0; i < g->num_nodes(); ++i) {
      if (!g->target_mask[i]) continue;
      rows.insert(rows.end(), g->x.row(i) + col_begin, g->x.row(i) + col_begin + col_width);
      labels.push_back(g->y[i]);
    }
  }
  const std::size_t n = labels.size();
  ad::Tensor<float> x(n, col_width, std::move(rows));

  ad::ParamStore<float> ps;
  std::mt19937_64 rng(opt.seed);
  const double bound = 1.0 / std::sqrt(double(std::max<std::size_t>(col_width, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  ad::Tensor<float> w(col_width, num_classes), b(1, num_classes);
  for (auto& v : w.data) v = float(dist(rng));
  for (auto& v : b.data) v = float(dist(rng));
  ps.add("weight", std::move(w));
  ps.add("bias", std::move(b));

  const auto wd = class_weights(target_label_counts(train, num_classes), opt.weight_mode);
  const std::vector<float> weights(wd.begin(), wd.end());
  ad::Adam<float> adam;
  for (int epoch = 0; epoch < opt.epochs && n > 0; ++epoch) {
    ad::Tape<float> t;
    ad::Var p = t.softmax_rows(t.add(t.matmul(t.constant(x), t.leaf(ps.get("weight"))), t.leaf(ps.get("bias"))));
    ad::Var loss = t.weighted_cross_entropy(p, labels, weights, std::vector<std::uint8_t>(n, 1));
    ps.zero_grad();
    t.backward(loss);
    adam.step(ps, float(opt.lr));
  }
  LinearSoftmax out;
  out.col_begin = col_begin;
  out.col_width = col_width;
  out.weight = ps.get("weight");
  out.bias = ps.get("bias");
  out.weight.grad.clear();
  out.bias.grad.clear();
  return out;
}

LinearSoftmax LinearSoftmax::fit_full(const std::vector<const AssemblyGraph*>& train, std::size_t num_classes,
                                      const LinearSoftmaxOptions& opt) {
  if (train.empty()) throw ConfigError("empty training split");
  return fit(train, num_classes, 0, train.front()->x.cols, opt);
}

LinearSoftmax LinearSoftmax::fit_visual(const std::vector<const AssemblyGraph*>& train, std::size_t num_classes,
                                        const LinearSoftmaxOptions& opt) {
  if (train.empty()) throw ConfigError("empty training split");
  const FeatureBlock* b = train.front()->schema.find(block::kBodyGeometry);
  if (!b) throw ConfigError("corpus has no body_geometry block");
  return fit(train, num_classes, b->offset, b->width, opt);
}

ad::Tensor<float> LinearSoftmax::predict(const AssemblyGraph& g) const {
  ad::Tape<float> t;
  ad::Var p = t.softmax_rows(t.add(t.matmul(t.constant(slice(g.x, col_begin, col_width)), t.constant(weight)),
                                   t.constant(bias)));
  return t.value(p);
}

Evaluation LinearSoftmax::evaluate(const std::vector<const AssemblyGraph*>& graphs) const {
  Evaluation e;
  for (const auto* g : graphs) append(e, rank_predictions(predict(*g)), *g);
  return e;
}

}  // namespace matgraph
