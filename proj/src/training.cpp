#include "matgraph/training.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "matgraph/errors.hpp"

namespace matgraph {

const char* to_string(WeightMode mode) {
  return mode == WeightMode::Uniform ? "uniform" : "inverse_frequency";
}

WeightMode weight_mode_from_string(std::string_view name) {
  if (name == "uniform") return WeightMode::Uniform;
  if (name == "inverse_frequency") return WeightMode::InverseFrequency;
  throw ConfigError("unknown weight mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (runs < 1) throw ConfigError("runs must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (batch_graphs < 1) throw ConfigError("batch size must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
}

json TrainConfig::to_json() const {
  return {{"epochs", epochs}, {"patience", patience}, {"batch_graphs", batch_graphs},
          {"lr", lr},         {"weight_mode", to_string(weight_mode)}, {"runs", runs}};
}

TrainConfig TrainConfig::from_json(const json& d) {
  TrainConfig c;
  c.epochs = d.value("epochs", c.epochs);
  c.patience = d.value("patience", c.patience);
  c.batch_graphs = d.value("batch_graphs", c.batch_graphs);
  c.lr = d.value("lr", c.lr);
  c.weight_mode = weight_mode_from_string(d.value("weight_mode", std::string("inverse_frequency")));
  c.runs = d.value("runs", c.runs);
  c.validate();
  return c;
}

std::string RunHistory::to_csv() const {
  std::string out = "epoch,train_loss,val_micro_f1,lr\n";
  for (const auto& e : epochs)
    out += std::to_string(e.epoch) + "," + format_fixed(e.train_loss) + "," + format_fixed(e.val_micro_f1) + "," +
           format_fixed(e.lr, 9) + "\n";
  return out;
}

json RunHistory::summary() const {
  return {{"epochs_run", epochs.size()}, {"best_epoch", best_epoch}, {"best_val_micro_f1", best_val_micro_f1}};
}

std::vector<double> class_weights(const std::vector<std::int64_t>& counts, WeightMode mode) {
  std::vector<double> w(counts.size(), 1.0);
  if (mode == WeightMode::Uniform || counts.empty()) return w;
  double sum = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    w[c] = 1.0 / static_cast<double>(std::max<std::int64_t>(counts[c], 1));
    sum += w[c];
  }
  const double scale = static_cast<double>(counts.size()) / sum;
  for (auto& v : w) v *= scale;
  return w;
}

std::vector<std::int64_t> target_label_counts(const std::vector<const AssemblyGraph*>& graphs, std::size_t num_classes) {
  std::vector<std::int64_t> counts(num_classes, 0);
  for (const auto* g : graphs)
    for (std::size_t i = 0; i < g->num_nodes(); ++i)
      if (g->target_mask[i] && g->y[i] >= 0 && std::size_t(g->y[i]) < num_classes) ++counts[g->y[i]];
  return counts;
}

Evaluation evaluate(const ad::ParamStore<float>& params, const ModelConfig& model,
                    const std::vector<const AssemblyGraph*>& graphs) {
  Evaluation e;
  for (const auto* g : graphs) {
    const auto probs = predict_probs(params, model, GraphInput<float>::from(*g));
    auto ranked = rank_predictions(probs);
    e.ranked.insert(e.ranked.end(), std::make_move_iterator(ranked.begin()), std::make_move_iterator(ranked.end()));
    e.truth.insert(e.truth.end(), g->y.begin(), g->y.end());
    e.mask.insert(e.mask.end(), g->target_mask.begin(), g->target_mask.end());
  }
  return e;
}

double target_micro_f1(const Evaluation& e) {
  if (std::none_of(e.mask.begin(), e.mask.end(), [](auto m) { return m != 0; })) return 0.0;
  return micro_f1(argmax_labels(e.ranked), e.truth, e.mask);
}

TrainResult train(ModelConfig model, const TrainConfig& cfg, const std::vector<const AssemblyGraph*>& train_graphs,
                  const std::vector<const AssemblyGraph*>& val_graphs, std::uint64_t seed) {
  cfg.validate();
  if (train_graphs.empty()) throw ConfigError("empty training split");
  model.seed = seed;
  model.validate();
  const auto started = std::chrono::steady_clock::now();

  TrainResult out;
  out.model = model;
  ad::ParamStore<float> params = init_params<float>(model);
  ad::Adam<float> adam;
  const auto weights_d = class_weights(target_label_counts(train_graphs, model.num_classes), cfg.weight_mode);
  const std::vector<float> weights(weights_d.begin(), weights_d.end());

  std::vector<std::size_t> order(train_graphs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 0x7261696eULL));
  std::uint64_t step = 0;
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = ad::cosine_lr(epoch, cfg.epochs, cfg.lr);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_graphs) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_graphs));
      std::vector<const AssemblyGraph*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_graphs[order[i]]);
      const AssemblyGraph merged = merge_graphs(batch);

      ad::Tape<float> tape;
      auto fwd = model_forward(tape, params, model, GraphInput<float>::from(merged), true, mix_seed(seed, step));
      // Per-graph weighted cross-entropy averaged over graphs that have targets.
      ad::Var total;
      int scored = 0;
      std::size_t offset = 0;
      for (const auto* g : batch) {
        std::vector<std::uint8_t> mask(merged.num_nodes(), 0);
        bool any = false;
        for (std::size_t i = 0; i < g->num_nodes(); ++i) {
          mask[offset + i] = g->target_mask[i];
          any = any || g->target_mask[i];
        }
        offset += g->num_nodes();
        if (!any) continue;
        ad::Var l = tape.weighted_cross_entropy(fwd.probs, merged.y, weights, std::move(mask));
        total = total.valid() ? tape.add(total, l) : l;
        ++scored;
      }
      ++step;
      if (!scored) continue;
      ad::Var loss = tape.scale(total, 1.0f / static_cast<float>(scored));
      params.zero_grad();
      tape.backward(loss);
      adam.step(params, static_cast<float>(lr));
      loss_sum += tape.value(loss).data[0];
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches ? loss_sum / batches : 0.0;
    rec.lr = lr;
    rec.val_micro_f1 = val_graphs.empty() ? 0.0 : target_micro_f1(evaluate(params, model, val_graphs));
    out.history.epochs.push_back(rec);

    if (val_graphs.empty() || rec.val_micro_f1 > out.history.best_val_micro_f1) {
      out.history.best_val_micro_f1 = rec.val_micro_f1;
      out.history.best_epoch = epoch;
      out.params = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      spdlog::debug("early stop at epoch {} (best {})", epoch, out.history.best_epoch);
      break;
    }
  }
  out.history.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

// ---- repeated runs ----------------------------------------------------

const AggregateMetric& MultiRunResult::get(const std::string& metric, int k) const {
  for (const auto& a : aggregate)
    if (a.metric == metric && a.k == k) return a;
  throw MetricError("no aggregate for metric " + metric + " k=" + std::to_string(k));
}

MultiRunResult multi_run(int n, std::uint64_t seed0, int jobs,
                         const std::function<RunMetrics(std::uint64_t seed, int run)>& body) {
  if (n < 1) throw ConfigError("multi_run needs at least one run");
  MultiRunResult r;
  for (int i = 0; i < n; ++i) r.seeds.push_back(seed0 + static_cast<std::uint64_t>(i));
  r.runs.resize(n);
  parallel_for(static_cast<std::size_t>(n), jobs, [&](std::size_t i) { r.runs[i] = body(r.seeds[i], int(i)); });
  for (const auto& m : r.runs.front()) {
    std::vector<double> values;
    for (const auto& run : r.runs)
      for (const auto& v : run)
        if (v.metric == m.metric && v.k == m.k) values.push_back(v.value);
    r.aggregate.push_back({m.metric, m.k, mean_std(values)});
  }
  return r;
}

std::string metrics_csv_rows(const std::string& experiment, const std::string& split, const MultiRunResult& r) {
  std::string out;
  for (std::size_t i = 0; i < r.runs.size(); ++i)
    for (const auto& m : r.runs[i])
      out += experiment + "," + std::to_string(i) + "," + std::to_string(r.seeds[i]) + "," + split + "," + m.metric +
             "," + std::to_string(m.k) + "," + format_fixed(m.value) + "\n";
  for (const char* which : {"mean", "std"})
    for (const auto& a : r.aggregate)
      out += experiment + "," + which + ",," + split + "," + a.metric + "," + std::to_string(a.k) + "," +
             format_fixed(std::string_view(which) == "mean" ? a.stats.mean : a.stats.std) + "\n";
  return out;
}

std::vector<GridRow> grid_search(const ModelConfig& base, const std::vector<int>& layers,
                                 const std::vector<int>& hidden, const std::vector<LayerKind>& kinds,
                                 const TrainConfig& cfg, const std::vector<const AssemblyGraph*>& train_graphs,
                                 const std::vector<const AssemblyGraph*>& val_graphs, std::uint64_t seed0, int jobs) {
  std::vector<ModelConfig> cells;
  for (auto kind : kinds)
    for (int k : layers)
      for (int h : hidden) {
        ModelConfig m = base;
        m.kind = kind;
        m.num_layers = k;
        m.hidden = h;
        m.validate();
        cells.push_back(m);
      }
  if (cells.empty()) throw ConfigError("empty grid");
  // Flatten (cell, run) so every training run is an independent task.
  const std::size_t runs = static_cast<std::size_t>(cfg.runs);
  std::vector<double> scores(cells.size() * runs);
  parallel_for(scores.size(), jobs, [&](std::size_t i) {
    const auto& m = cells[i / runs];
    scores[i] = train(m, cfg, train_graphs, val_graphs, seed0 + i % runs).history.best_val_micro_f1;
  });
  std::vector<GridRow> rows;
  for (std::size_t c = 0; c < cells.size(); ++c)
    rows.push_back({cells[c], mean_std(std::span<const double>(scores.data() + c * runs, runs))});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const GridRow& a, const GridRow& b) { return a.val_micro_f1.mean > b.val_micro_f1.mean; });
  return rows;
}

}  // namespace matgraph
