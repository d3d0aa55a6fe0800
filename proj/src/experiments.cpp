#include "matgraph/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <spdlog/spdlog.h>

#include "matgraph/baselines.hpp"
#include "matgraph/errors.hpp"
#include "matgraph/metrics.hpp"
#include "matgraph/util.hpp"

namespace matgraph {

namespace {

std::string pm(const MeanStd& s) { return format_fixed(s.mean, 3) + " ± " + format_fixed(s.std, 3); }

std::string ratio_label(double r) { return format_fixed(r, 2); }

json aggregate_json(const MultiRunResult& r) {
  json out = json::array();
  for (const auto& a : r.aggregate)
    out.push_back({{"metric", a.metric}, {"k", a.k}, {"mean", a.stats.mean}, {"std", a.stats.std}});
  return out;
}

json runs_json(const MultiRunResult& r) {
  json out = json::array();
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    json values = json::array();
    for (const auto& m : r.runs[i]) values.push_back({{"metric", m.metric}, {"k", m.k}, {"value", m.value}});
    out.push_back({{"run", i}, {"seed", r.seeds[i]}, {"values", values}});
  }
  return out;
}

ModelConfig sized(ModelConfig m, const std::vector<const AssemblyGraph*>& graphs, std::size_t num_classes) {
  if (graphs.empty()) throw ConfigError("protocol needs at least one training graph");
  m.input_width = graphs.front()->x.cols;
  m.num_classes = num_classes;
  return m;
}

struct Splits {
  std::vector<const AssemblyGraph*> train, val, test;
};

Splits splits_of(const Corpus& c) { return {c.subset(c.split.train), c.subset(c.split.val), c.subset(c.split.test)}; }

void add_topk(RunMetrics& m, const std::string& prefix, const Evaluation& e, const std::vector<int>& ks) {
  for (int k : ks) m.push_back({prefix + "topk", k, topk_score(e.ranked, e.truth, e.mask, k)});
}

Evaluation train_and_test(const ModelConfig& model, const TrainConfig& cfg, const Splits& s, std::uint64_t seed) {
  const auto r = train(model, cfg, s.train, s.val, seed);
  spdlog::debug("run seed {}: best epoch {} val {:.4f} ({:.1f}s)", seed, r.history.best_epoch,
                r.history.best_val_micro_f1, r.history.wall_seconds);
  return evaluate(r.params, r.model, s.test);
}

std::vector<int> valid_ks(const std::vector<int>& ks, std::size_t num_classes) {
  std::vector<int> out;
  for (int k : ks)
    if (k >= 1 && std::size_t(k) <= num_classes) out.push_back(k);
  if (out.empty()) throw ConfigError("no usable k values");
  return out;
}

ExperimentOutput start(const std::string& protocol, const ExperimentOptions& opt) {
  opt.train.validate();
  ExperimentOutput out;
  out.protocol = protocol;
  out.manifest = opt.manifest(protocol);
  out.metrics_csv = std::string(kMetricsCsvHeader) + "\n";
  out.report = {{"protocol", protocol}, {"config", out.manifest}};
  return out;
}

}  // namespace

json ExperimentOptions::manifest(const std::string& protocol) const {
  json m = {{"protocol", protocol},   {"corpus", corpus_path},       {"output_dir", output_dir},
            {"model", model.to_json()}, {"train", train.to_json()}, {"seed", seed}};
  json axes = json::object();
  if (protocol == "partial_guided") {
    axes["ratios"] = ratios;
    axes["layers"] = layers;
    axes["reveal_context"] = reveal_context;
  } else if (protocol == "user_guided") {
    axes["depths"] = depths;
    axes["ks"] = ks;
  } else if (protocol == "feature_ablation") {
    axes["blocks"] = blocks;
    axes["edge_modes"] = edge_modes;
  } else {
    axes["ks"] = ks;
  }
  m["grid"] = axes;
  return m;
}

void write_experiment(const std::filesystem::path& dir, const ExperimentOutput& out) {
  write_text_file(dir / "manifest.json", out.manifest.dump(2) + "\n");
  write_text_file(dir / "report.json", out.report.dump(2) + "\n");
  write_text_file(dir / "metrics.csv", out.metrics_csv);
  write_text_file(dir / "table.md", out.table_md);
  write_text_file(dir / "plot.csv", out.plot_csv);
}

std::uint64_t context_seed(std::uint64_t run_seed, const std::string& graph_id) {
  return mix_seed(run_seed, fnv1a64(graph_id));
}

std::vector<AssemblyGraph> with_context(const std::vector<const AssemblyGraph*>& graphs, std::size_t num_classes,
                                        double ratio, std::uint64_t run_seed, bool reveal) {
  std::vector<AssemblyGraph> out;
  out.reserve(graphs.size());
  for (const auto* g : graphs) {
    if (ratio == 0.0) {
      out.push_back(*g);
      continue;
    }
    out.push_back(inject_context_labels(add_material_block(*g, num_classes), ratio,
                                        context_seed(run_seed, g->graph_id), reveal));
  }
  return out;
}

std::vector<AssemblyGraph> with_tiers(const std::vector<const AssemblyGraph*>& graphs, int depth,
                                      const FittedState& state) {
  std::vector<AssemblyGraph> out;
  out.reserve(graphs.size());
  for (const auto* g : graphs) out.push_back(inject_tier_features(*g, depth, state.catalog, state.tiers));
  return out;
}

std::vector<const AssemblyGraph*> pointers(const std::vector<AssemblyGraph>& graphs) {
  std::vector<const AssemblyGraph*> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(&g);
  return out;
}

void InputProtocol::validate() const {
  if (!(context_ratio >= 0.0 && context_ratio < 1.0)) throw ConfigError("context ratio must be in [0, 1)");
  if (tier_depth < 0 || tier_depth > 3) throw ConfigError("tier depth must be in 0..3");
  if (ablate_edges != "none") connection_kind_from_string(ablate_edges);
}

json InputProtocol::to_json() const {
  return {{"context_ratio", context_ratio}, {"reveal_context", reveal_context}, {"tier_depth", tier_depth},
          {"ablate_blocks", ablate_blocks}, {"ablate_edges", ablate_edges}};
}

InputProtocol InputProtocol::from_json(const json& d) {
  InputProtocol p;
  p.context_ratio = d.value("context_ratio", 0.0);
  p.reveal_context = d.value("reveal_context", true);
  p.tier_depth = d.value("tier_depth", 0);
  p.ablate_blocks = d.value("ablate_blocks", std::vector<std::string>{});
  p.ablate_edges = d.value("ablate_edges", std::string("none"));
  p.validate();
  return p;
}

std::vector<AssemblyGraph> InputProtocol::apply(const std::vector<const AssemblyGraph*>& graphs,
                                                const FittedState& state, std::uint64_t run_seed) const {
  validate();
  std::vector<AssemblyGraph> out;
  out.reserve(graphs.size());
  const std::size_t C = state.labels.size();
  for (const auto* src : graphs) {
    AssemblyGraph g = ablate_edges == "none" ? *src : apply_edge_ablation(*src, connection_kind_from_string(ablate_edges));
    if (ablate_edges != "none" && !validate_graph(g).keep) continue;
    for (const auto& b : ablate_blocks) g = apply_node_ablation(g, b);
    if (context_ratio > 0.0)
      g = inject_context_labels(add_material_block(g, C), context_ratio, context_seed(run_seed, g.graph_id),
                                reveal_context);
    g = inject_tier_features(g, tier_depth, state.catalog, state.tiers);
    out.push_back(std::move(g));
  }
  return out;
}

// ---- fully guided --------------------------------------------------------

ExperimentOutput run_fully_guided(const Corpus& corpus, const ExperimentOptions& opt) {
  ExperimentOutput out = start("fully_guided", opt);
  const std::size_t C = corpus.state.labels.size();
  const Splits s = splits_of(corpus);
  const ModelConfig model = sized(opt.model, s.train, C);
  const auto ks = valid_ks(opt.ks, C);
  const bool has_visual = corpus.schema.has(block::kBodyGeometry);

  const auto majority = MajorityBaseline::fit(s.train, C);
  const Evaluation majority_eval = majority.evaluate(s.test);

  auto result = multi_run(opt.train.runs, opt.seed, opt.jobs, [&](std::uint64_t seed, int) {
    RunMetrics m;
    const Evaluation e = train_and_test(model, opt.train, s, seed);
    add_topk(m, "gnn_", e, ks);
    const auto pred = argmax_labels(e.ranked);
    m.push_back({"gnn_micro_f1", 0, micro_f1(pred, e.truth, e.mask)});
    m.push_back({"gnn_weighted_f1", 0, weighted_f1(pred, e.truth, e.mask)});
    add_topk(m, "majority_", majority_eval, ks);

    LinearSoftmaxOptions lo;
    lo.weight_mode = opt.train.weight_mode;
    lo.seed = seed;
    add_topk(m, "linear_softmax_", LinearSoftmax::fit_full(s.train, C, lo).evaluate(s.test), ks);
    if (has_visual) add_topk(m, "visual_only_", LinearSoftmax::fit_visual(s.train, C, lo).evaluate(s.test), ks);
    spdlog::info("fully guided seed {}: top-1 {:.4f}", seed, m.front().value);
    return m;
  });

  out.metrics_csv += metrics_csv_rows("fully_guided", "test", result);
  out.report["aggregate"] = aggregate_json(result);
  out.report["runs"] = runs_json(result);
  out.report["majority_class"] = corpus.state.labels.classes[majority.mode()];

  std::vector<std::string> models{"gnn", "majority", "linear_softmax"};
  if (has_visual) models.push_back("visual_only");
  out.table_md = "| Model |";
  for (int k : ks) out.table_md += " Top-" + std::to_string(k) + " |";
  out.table_md += "\n|---|";
  for (std::size_t i = 0; i < ks.size(); ++i) out.table_md += "---|";
  out.table_md += "\n";
  out.plot_csv = "model,k,mean,std\n";
  for (const auto& name : models) {
    out.table_md += "| " + name + " |";
    for (int k : ks) {
      const auto& a = result.get(name + "_topk", k);
      out.table_md += " " + pm(a.stats) + " |";
      out.plot_csv += name + "," + std::to_string(k) + "," + format_fixed(a.stats.mean) + "," +
                      format_fixed(a.stats.std) + "\n";
    }
    out.table_md += "\n";
  }
  return out;
}

// ---- partially guided ----------------------------------------------------

ExperimentOutput run_partial_guided(const Corpus& corpus, const ExperimentOptions& opt) {
  ExperimentOutput out = start("partial_guided", opt);
  if (opt.ratios.empty() || opt.layers.empty()) throw ConfigError("partial grid needs ratios and layers");
  for (double r : opt.ratios)
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("context ratio must be in [0, 1)");
  const std::size_t C = corpus.state.labels.size();
  const Splits base = splits_of(corpus);
  const auto ks = valid_ks(opt.ks, C);

  json cells = json::array();
  std::map<std::pair<double, int>, MeanStd> top1;
  for (double ratio : opt.ratios) {
    for (int layers : opt.layers) {
      auto result = multi_run(opt.train.runs, opt.seed, opt.jobs, [&](std::uint64_t seed, int) {
        const auto tr = with_context(base.train, C, ratio, seed, opt.reveal_context);
        const auto va = with_context(base.val, C, ratio, seed, opt.reveal_context);
        const auto te = with_context(base.test, C, ratio, seed, opt.reveal_context);
        Splits s{pointers(tr), pointers(va), pointers(te)};
        ModelConfig model = sized(opt.model, s.train, C);
        model.num_layers = layers;
        RunMetrics m;
        add_topk(m, "", train_and_test(model, opt.train, s, seed), ks);
        return m;
      });
      const std::string name = "partial_guided:ratio=" + ratio_label(ratio) + ":layers=" + std::to_string(layers);
      out.metrics_csv += metrics_csv_rows(name, "test", result);
      top1[{ratio, layers}] = result.get("topk", 1).stats;
      cells.push_back({{"ratio", ratio}, {"layers", layers}, {"aggregate", aggregate_json(result)},
                       {"runs", runs_json(result)}});
      spdlog::info("partial guided ratio {} layers {}: top-1 {}", ratio_label(ratio), layers,
                   pm(result.get("topk", 1).stats));
    }
  }
  out.report["cells"] = cells;

  out.table_md = "| Context ratio |";
  for (int l : opt.layers) out.table_md += " " + std::to_string(l) + " layers |";
  out.table_md += "\n|---|";
  for (std::size_t i = 0; i < opt.layers.size(); ++i) out.table_md += "---|";
  out.table_md += "\n";
  out.plot_csv = "ratio,layers,mean,std\n";
  for (double r : opt.ratios) {
    out.table_md += "| " + ratio_label(r) + " |";
    for (int l : opt.layers) {
      const auto& s = top1.at({r, l});
      out.table_md += " " + pm(s) + " |";
      out.plot_csv += ratio_label(r) + "," + std::to_string(l) + "," + format_fixed(s.mean) + "," +
                      format_fixed(s.std) + "\n";
    }
    out.table_md += "\n";
  }
  return out;
}

// ---- user guided ---------------------------------------------------------

ExperimentOutput run_user_guided(const Corpus& corpus, const ExperimentOptions& opt) {
  ExperimentOutput out = start("user_guided", opt);
  if (opt.depths.empty()) throw ConfigError("user grid needs depths");
  const std::size_t C = corpus.state.labels.size();
  const Splits base = splits_of(corpus);
  const auto ks = valid_ks(opt.ks, C);

  json cells = json::array();
  std::map<int, MultiRunResult> results;
  for (int depth : opt.depths) {
    corpus.state.tiers.width(depth);  // validates the depth
    auto result = multi_run(opt.train.runs, opt.seed, opt.jobs, [&](std::uint64_t seed, int) {
      const auto tr = with_tiers(base.train, depth, corpus.state);
      const auto va = with_tiers(base.val, depth, corpus.state);
      const auto te = with_tiers(base.test, depth, corpus.state);
      Splits s{pointers(tr), pointers(va), pointers(te)};
      const Evaluation e = train_and_test(sized(opt.model, s.train, C), opt.train, s, seed);
      RunMetrics m;
      for (int k : ks) m.push_back({"micro_f1", k, topk_score(e.ranked, e.truth, e.mask, k)});
      for (int k : ks) m.push_back({"weighted_f1", k, weighted_f1(topk_predictions(e.ranked, e.truth, k), e.truth, e.mask)});
      return m;
    });
    const std::string name = "user_guided:depth=" + std::to_string(depth);
    out.metrics_csv += metrics_csv_rows(name, "test", result);
    cells.push_back({{"depth", depth}, {"aggregate", aggregate_json(result)}, {"runs", runs_json(result)}});
    spdlog::info("user guided depth {}: top-1 {}", depth, pm(result.get("micro_f1", ks.front()).stats));
    results.emplace(depth, std::move(result));
  }
  out.report["cells"] = cells;

  out.table_md = "| Tier depth |";
  for (int k : ks) out.table_md += " Top-" + std::to_string(k) + " F_m | Top-" + std::to_string(k) + " F_w |";
  out.table_md += "\n|---|";
  for (std::size_t i = 0; i < 2 * ks.size(); ++i) out.table_md += "---|";
  out.table_md += "\n";
  out.plot_csv = "depth,k,metric,mean,std\n";
  for (int depth : opt.depths) {
    const auto& r = results.at(depth);
    out.table_md += "| " + std::to_string(depth) + " |";
    for (int k : ks) {
      for (const char* metric : {"micro_f1", "weighted_f1"}) {
        const auto& a = r.get(metric, k);
        out.table_md += " " + pm(a.stats) + " |";
        out.plot_csv += std::to_string(depth) + "," + std::to_string(k) + "," + metric + "," +
                        format_fixed(a.stats.mean) + "," + format_fixed(a.stats.std) + "\n";
      }
    }
    out.table_md += "\n";
  }
  return out;
}

// ---- feature ablation ----------------------------------------------------

ExperimentOutput run_feature_ablation(const Corpus& corpus, const ExperimentOptions& opt) {
  ExperimentOutput out = start("feature_ablation", opt);
  const std::size_t C = corpus.state.labels.size();
  std::vector<std::string> rows{"None"};
  rows.insert(rows.end(), opt.blocks.begin(), opt.blocks.end());
  if (opt.edge_modes.empty()) throw ConfigError("ablation grid needs at least one edge mode");

  json cells = json::array();
  std::map<std::pair<std::string, std::string>, MeanStd> top1;
  for (const auto& edge_mode : opt.edge_modes) {
    for (const auto& block_name : rows) {
      // Ablate every graph, then re-apply the discard rule.
      std::vector<AssemblyGraph> graphs;
      std::vector<std::string> dropped;
      for (const auto& g : corpus.graphs) {
        AssemblyGraph a = edge_mode == "none" ? g : apply_edge_ablation(g, connection_kind_from_string(edge_mode));
        if (block_name != "None") a = apply_node_ablation(a, block_name);
        if (validate_graph(a).keep)
          graphs.push_back(std::move(a));
        else
          dropped.push_back(g.graph_id);
      }
      std::map<std::string, const AssemblyGraph*> by_id;
      for (const auto& g : graphs) by_id[g.graph_id] = &g;
      auto pick = [&](const std::vector<std::string>& ids) {
        std::vector<const AssemblyGraph*> v;
        for (const auto& id : ids)
          if (auto it = by_id.find(id); it != by_id.end()) v.push_back(it->second);
        return v;
      };
      const Splits s{pick(corpus.split.train), pick(corpus.split.val), pick(corpus.split.test)};
      if (s.train.empty() || s.test.empty()) throw ConfigError("ablation left an empty split (" + block_name + ")");
      const ModelConfig model = sized(opt.model, s.train, C);

      auto result = multi_run(opt.train.runs, opt.seed, opt.jobs, [&](std::uint64_t seed, int) {
        RunMetrics m;
        add_topk(m, "", train_and_test(model, opt.train, s, seed), {1});
        return m;
      });
      const std::string name = "feature_ablation:block=" + block_name + ":edges=" + edge_mode;
      out.metrics_csv += metrics_csv_rows(name, "test", result);
      top1[{block_name, edge_mode}] = result.get("topk", 1).stats;
      cells.push_back({{"block", block_name},
                       {"edge_mode", edge_mode},
                       {"node_width", model.input_width},
                       {"graphs", graphs.size()},
                       {"dropped", dropped},
                       {"aggregate", aggregate_json(result)},
                       {"runs", runs_json(result)}});
      spdlog::info("ablation {} / {}: d_x {} top-1 {}", block_name, edge_mode, model.input_width,
                   pm(result.get("topk", 1).stats));
    }
  }
  out.report["cells"] = cells;

  out.table_md = "| Ablated node feature |";
  for (const auto& e : opt.edge_modes) out.table_md += " Edges: " + e + " |";
  out.table_md += "\n|---|";
  for (std::size_t i = 0; i < opt.edge_modes.size(); ++i) out.table_md += "---|";
  out.table_md += "\n";
  out.plot_csv = "block,edge_mode,mean,std\n";
  for (const auto& b : rows) {
    out.table_md += "| " + b + " |";
    for (const auto& e : opt.edge_modes) {
      const auto& s = top1.at({b, e});
      out.table_md += " " + pm(s) + " |";
      out.plot_csv += b + "," + e + "," + format_fixed(s.mean) + "," + format_fixed(s.std) + "\n";
    }
    out.table_md += "\n";
  }
  return out;
}

// ---- statistics ------------------------------------------------------------

CountStats count_stats(const std::vector<std::size_t>& values) {
  CountStats s;
  if (values.empty()) return s;
  std::vector<double> d(values.begin(), values.end());
  const MeanStd ms = mean_std(d);
  s.mean = ms.mean;
  s.std = ms.std;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  std::map<std::size_t, std::size_t> hist;
  for (auto v : values) ++hist[v];
  s.histogram.assign(hist.begin(), hist.end());
  return s;
}

DatasetStats dataset_stats(const std::vector<const AssemblyGraph*>& graphs, const LabelVocabulary& labels) {
  DatasetStats s;
  s.graphs = graphs.size();
  std::vector<std::size_t> nodes, edges;
  std::vector<std::size_t> label_counts(labels.size(), 0);
  for (const auto* g : graphs) {
    nodes.push_back(g->num_nodes());
    edges.push_back(g->num_edges());
    s.nodes += g->num_nodes();
    s.edges += g->num_edges();
    for (std::size_t e = 0; e < g->num_edges(); ++e)
      for (int k = 0; k < kConnectionKinds; ++k)
        if (g->edge_attr.row(e)[k] != 0.0f) ++s.edge_kinds[k];
    for (auto y : g->y)
      if (y >= 0 && std::size_t(y) < label_counts.size()) ++label_counts[y];
  }
  s.node_counts = count_stats(nodes);
  s.edge_counts = count_stats(edges);
  for (std::size_t c = 0; c < labels.size(); ++c) s.labels.emplace_back(labels.classes[c], label_counts[c]);
  return s;
}

DatasetStats dataset_stats(const Corpus& corpus) { return dataset_stats(corpus.all(), corpus.state.labels); }

namespace {

json count_json(const CountStats& c) {
  json hist = json::array();
  for (auto [v, n] : c.histogram) hist.push_back({v, n});
  return {{"mean", c.mean}, {"std", c.std}, {"min", c.min}, {"max", c.max}, {"histogram", hist}};
}

}  // namespace

json DatasetStats::to_json() const {
  json kinds = json::object();
  for (int k = 0; k < kConnectionKinds; ++k) kinds[to_string(static_cast<ConnectionKind>(k))] = edge_kinds[k];
  json labs = json::array();
  for (const auto& [name, n] : labels) labs.push_back({{"label", name}, {"count", n}});
  return {{"graphs", graphs},          {"nodes", nodes},    {"edges", edges}, {"node_counts", count_json(node_counts)},
          {"edge_counts", count_json(edge_counts)}, {"edge_kinds", kinds}, {"labels", labs}};
}

std::string DatasetStats::to_markdown() const {
  std::string out = "| Quantity | Mean | Std | Min | Max |\n|---|---|---|---|---|\n";
  auto row = [&](const char* name, const CountStats& c) {
    out += std::string("| ") + name + " | " + format_fixed(c.mean, 3) + " | " + format_fixed(c.std, 3) + " | " +
           std::to_string(c.min) + " | " + std::to_string(c.max) + " |\n";
  };
  row("Nodes per graph", node_counts);
  row("Directed edges per graph", edge_counts);
  out += "\n| Edge kind | Directed edges |\n|---|---|\n";
  for (int k = 0; k < kConnectionKinds; ++k)
    out += std::string("| ") + to_string(static_cast<ConnectionKind>(k)) + " | " + std::to_string(edge_kinds[k]) + " |\n";
  out += "\n| Material | Bodies |\n|---|---|\n";
  for (const auto& [name, n] : labels) out += "| " + name + " | " + std::to_string(n) + " |\n";
  return out;
}

}  // namespace matgraph
