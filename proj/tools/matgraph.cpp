// matgraph: command-line driver for the material recommendation pipeline.
//
// Stages talk through files only:
//   synth -> assemblies/ catalog.json semantic.tsv split.json
//   ingest -> records.json
//   build-graphs -> corpus/ (graphs/*.json + manifest.json)
//   train -> model.ckpt history.csv train.json
//   evaluate -> metrics.csv report.json
//
// Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "matgraph/checkpoint.hpp"
#include "matgraph/corpus.hpp"
#include "matgraph/errors.hpp"
#include "matgraph/experiments.hpp"
#include "matgraph/service.hpp"
#include "matgraph/synth.hpp"
#include "matgraph/training.hpp"

namespace fs = std::filesystem;
using namespace matgraph;

namespace {

struct Global {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string log_level = "info";
  int jobs = 1;

  fs::path out() const { return out_dir; }
};

struct ModelFlags {
  int layers = 3;
  int hidden = 64;
  std::string kind = "sage_mean";
  double leaky_slope = 0.2;
  bool no_edge_features = false;

  void add(CLI::App* app) {
    app->add_option("--layers", layers, "GNN layers K");
    app->add_option("--hidden", hidden, "Hidden width");
    app->add_option("--kind", kind, "Layer kind")->check(CLI::IsMember({"sage_mean", "sage_lstm", "gconv"}));
    app->add_option("--leaky-slope", leaky_slope, "Negative slope of the layer activation (0 = ReLU)");
    app->add_flag("--no-edge-features", no_edge_features, "Ignore edge kind features in messages");
  }
  ModelConfig config() const {
    ModelConfig m;
    m.num_layers = layers;
    m.hidden = hidden;
    m.kind = layer_kind_from_string(kind);
    m.leaky_slope = leaky_slope;
    m.edge_features = !no_edge_features;
    return m;
  }
};

struct TrainFlags {
  TrainConfig cfg;
  std::string weight_mode = "inverse_frequency";

  void add(CLI::App* app, bool with_runs) {
    app->add_option("--epochs", cfg.epochs, "Maximum epochs");
    app->add_option("--patience", cfg.patience, "Early-stopping patience in epochs");
    app->add_option("--batch", cfg.batch_graphs, "Graphs per optimisation step");
    app->add_option("--lr", cfg.lr, "Base learning rate (cosine schedule)");
    app->add_option("--weight-mode", weight_mode, "Class weighting")
        ->check(CLI::IsMember({"inverse_frequency", "uniform"}));
    if (with_runs) app->add_option("--runs", cfg.runs, "Runs per configuration");
  }
  TrainConfig config() const {
    TrainConfig c = cfg;
    c.weight_mode = weight_mode_from_string(weight_mode);
    c.validate();
    return c;
  }
};

void print_report(const MetricsReport& r) {
  std::cout << "instances     " << r.instances << "\n";
  std::cout << "micro_f1      " << format_fixed(r.micro_f1, 4) << "\n";
  std::cout << "weighted_f1   " << format_fixed(r.weighted_f1, 4) << "\n";
  for (std::size_t k = 0; k < r.topk.size(); ++k)
    std::cout << "top-" << k + 1 << "         " << format_fixed(r.topk[k], 4) << "\n";
}

const std::vector<std::string>& split_ids(const Corpus& c, const std::string& split) {
  if (split == "train") return c.split.train;
  if (split == "val") return c.split.val;
  return c.split.test;
}

int run_synth(const Global& g, const std::string& kind, int graphs, double test_fraction, double default_rate) {
  SynthOptions o;
  o.kind = synth_kind_from_string(kind);
  o.graphs = graphs;
  o.seed = g.seed;
  o.test_fraction = test_fraction;
  o.default_name_rate = default_rate;
  const auto corpus = generate_synthetic(o);
  write_synthetic(g.out(), corpus);
  std::cout << "wrote " << corpus.assemblies.size() << " " << kind << " assemblies to " << g.out_dir << "\n";
  return 0;
}

int run_ingest(const Global& g, const std::string& assemblies, const std::string& catalog_path) {
  const MaterialCatalog catalog = parse_catalog(read_text_file(catalog_path));
  const auto raw = load_assembly_directory(assemblies, g.jobs);
  const IngestResult r = ingest_assemblies(raw, catalog);
  write_text_file(g.out() / "records.json", records_to_json(r).dump() + "\n");
  std::cout << "parsed " << r.parsed << " kept " << r.kept.size() << " dropped " << r.dropped.size() << "\n";
  for (const auto& d : r.dropped) std::cout << "  dropped " << d.id << ": " << d.reason << "\n";
  return 0;
}

int run_build(const Global& g, const std::string& records_path, const std::string& catalog_path,
              const std::string& split_path, const std::string& semantic_path, const std::string& visual_path,
              const std::string& pattern) {
  const IngestResult r = records_from_json(json::parse(read_text_file(records_path)));
  const MaterialCatalog catalog = parse_catalog(read_text_file(catalog_path));
  BuildOptions o;
  o.manifest = parse_split_manifest(read_text_file(split_path));
  if (!semantic_path.empty()) o.semantic = std::make_shared<EmbeddingTable>(EmbeddingTable::load(semantic_path));
  if (!visual_path.empty()) o.visual = std::make_shared<EmbeddingTable>(EmbeddingTable::load(visual_path));
  o.semantic_path = semantic_path;
  o.visual_path = visual_path;
  o.name_pattern = pattern;
  o.imputation_seed = g.seed;
  o.jobs = g.jobs;
  const Corpus c = build_corpus(r.kept, catalog, o);
  write_corpus(g.out() / "corpus", c);
  std::cout << "graphs " << c.graphs.size() << " (train " << c.split.train.size() << ", val " << c.split.val.size()
            << ", test " << c.split.test.size() << "), dropped " << c.dropped.size() << ", d_x "
            << c.schema.node_width() << ", classes " << c.state.labels.size() << "\n";
  return 0;
}

int run_stats(const Global& g, const std::string& corpus_path) {
  const Corpus c = load_corpus(corpus_path);
  const DatasetStats s = dataset_stats(c);
  write_text_file(g.out() / "stats.json", s.to_json().dump(2) + "\n");
  write_text_file(g.out() / "stats.md", s.to_markdown());
  std::cout << "graphs " << s.graphs << " nodes " << s.nodes << " edges " << s.edges << "\n";
  std::cout << "mean nodes " << format_fixed(s.node_counts.mean, 3) << " max " << s.node_counts.max << " std "
            << format_fixed(s.node_counts.std, 3) << "\n";
  std::cout << "mean edges " << format_fixed(s.edge_counts.mean, 3) << " max " << s.edge_counts.max << " std "
            << format_fixed(s.edge_counts.std, 3) << "\n";
  return 0;
}

int run_train(const Global& g, const std::string& corpus_path, const ModelFlags& mf, const TrainFlags& tf,
              const InputProtocol& protocol) {
  const Corpus c = load_corpus(corpus_path);
  protocol.validate();
  const auto train_graphs = protocol.apply(c.subset(c.split.train), c.state, g.seed);
  const auto val_graphs = protocol.apply(c.subset(c.split.val), c.state, g.seed);
  if (train_graphs.empty()) throw ConfigError("no training graphs");
  ModelConfig model = mf.config();
  model.input_width = train_graphs.front().x.cols;
  model.num_classes = c.state.labels.size();
  const TrainConfig cfg = tf.config();
  const TrainResult r = train(model, cfg, pointers(train_graphs), pointers(val_graphs), g.seed);

  Checkpoint ck;
  ck.model = r.model;
  ck.schema = train_graphs.front().schema;
  ck.state = c.state;
  ck.params = r.params;
  ck.training = {{"train", cfg.to_json()},
                 {"protocol", protocol.to_json()},
                 {"seed", g.seed},
                 {"corpus", corpus_path},
                 {"history", r.history.summary()}};
  save_checkpoint(g.out() / "model.ckpt", ck);
  write_text_file(g.out() / "history.csv", r.history.to_csv());
  write_text_file(g.out() / "train.json", ck.training.dump(2) + "\n");
  std::cout << "epochs " << r.history.epochs.size() << " best epoch " << r.history.best_epoch << " val micro-F1 "
            << format_fixed(r.history.best_val_micro_f1, 4) << "\n";
  std::cout << "checkpoint " << (g.out() / "model.ckpt").string() << " id " << ck.id() << "\n";
  return 0;
}

int run_evaluate(const Global& g, const std::string& corpus_path, const std::string& ckpt_path,
                 const std::string& split, int max_k) {
  const Corpus c = load_corpus(corpus_path);
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const InputProtocol protocol = InputProtocol::from_json(ck.training.value("protocol", json::object()));
  const std::uint64_t seed = ck.training.value("seed", std::uint64_t{0});
  const auto graphs = protocol.apply(c.subset(split_ids(c, split)), c.state, seed);
  if (graphs.empty()) throw ConfigError("split '" + split + "' has no graphs");
  if (!(graphs.front().schema == ck.schema))
    throw SchemaError("checkpoint schema " + ck.schema.digest() + " does not match corpus inputs " +
                      graphs.front().schema.digest());
  const Evaluation e = evaluate(ck.params, ck.model, pointers(graphs));
  const std::size_t C = ck.model.num_classes;
  const MetricsReport rep = compute_report(e.ranked, e.truth, e.mask, C, max_k);

  MultiRunResult r = multi_run(1, seed, 1, [&](std::uint64_t, int) {
    RunMetrics m{{"micro_f1", 0, rep.micro_f1}, {"weighted_f1", 0, rep.weighted_f1}};
    for (std::size_t k = 0; k < rep.topk.size(); ++k) m.push_back({"topk", int(k + 1), rep.topk[k]});
    for (std::size_t k = 0; k < rep.weighted_topk.size(); ++k)
      m.push_back({"weighted_topk", int(k + 1), rep.weighted_topk[k]});
    return m;
  });
  write_text_file(g.out() / "metrics.csv", std::string(kMetricsCsvHeader) + "\n" + metrics_csv_rows("evaluate", split, r));
  json report = rep.to_json();
  report["checkpoint_id"] = ck.id();
  report["split"] = split;
  report["classes"] = c.state.labels.classes;
  report["training"] = ck.training;
  write_text_file(g.out() / "report.json", report.dump(2) + "\n");
  print_report(rep);
  return 0;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int run_grid(const Global& g, const std::string& corpus_path, const ModelFlags& mf, const TrainFlags& tf,
             const std::vector<int>& layers, const std::vector<int>& hidden, const std::string& kinds) {
  const Corpus c = load_corpus(corpus_path);
  ModelConfig base = mf.config();
  base.input_width = c.schema.node_width();
  base.num_classes = c.state.labels.size();
  std::vector<LayerKind> ks;
  for (const auto& k : split_list(kinds)) ks.push_back(layer_kind_from_string(k));
  const auto rows = grid_search(base, layers, hidden, ks, tf.config(), c.subset(c.split.train), c.subset(c.split.val),
                                g.seed, g.jobs);
  std::string csv = "rank,kind,layers,hidden,val_micro_f1_mean,val_micro_f1_std\n";
  json table = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    csv += std::to_string(i + 1) + "," + to_string(r.model.kind) + "," + std::to_string(r.model.num_layers) + "," +
           std::to_string(r.model.hidden) + "," + format_fixed(r.val_micro_f1.mean) + "," +
           format_fixed(r.val_micro_f1.std) + "\n";
    table.push_back({{"model", r.model.to_json()}, {"mean", r.val_micro_f1.mean}, {"std", r.val_micro_f1.std}});
  }
  write_text_file(g.out() / "grid.csv", csv);
  write_text_file(g.out() / "grid.json",
                  json{{"train", tf.config().to_json()}, {"seed", g.seed}, {"rows", table}}.dump(2) + "\n");
  write_text_file(g.out() / "best_model.json", rows.front().model.to_json().dump(2) + "\n");
  std::cout << csv;
  return 0;
}

int run_experiment(const Global& g, const std::string& protocol, const std::string& corpus_path, ExperimentOptions opt,
                   const ModelFlags& mf, const TrainFlags& tf) {
  const Corpus c = load_corpus(corpus_path);
  opt.model = mf.config();
  opt.train = tf.config();
  opt.seed = g.seed;
  opt.jobs = g.jobs;
  opt.corpus_path = corpus_path;
  opt.output_dir = g.out_dir;
  ExperimentOutput out;
  if (protocol == "fully")
    out = run_fully_guided(c, opt);
  else if (protocol == "partial")
    out = run_partial_guided(c, opt);
  else if (protocol == "user")
    out = run_user_guided(c, opt);
  else
    out = run_feature_ablation(c, opt);
  write_experiment(g.out(), out);
  std::cout << out.table_md;
  return 0;
}

int run_serve(const std::string& host, int port, const std::string& checkpoint, const std::string& catalog,
              const std::string& semantic, const std::string& graph_cache, const std::string& cors, bool no_filter) {
  ServiceOptions o;
  if (!catalog.empty()) o.catalog = parse_catalog(read_text_file(catalog));
  if (!semantic.empty()) o.semantic = std::make_shared<EmbeddingTable>(EmbeddingTable::load(semantic));
  o.graph_cache = graph_cache;
  o.cors_origin = cors;
  o.tier_filter = !no_filter;
  InferenceService service(o);
  if (!checkpoint.empty()) {
    const Reply r = service.load_model_path(checkpoint);
    if (r.status != 200) throw ConfigError(r.body.dump());
  }
  HttpFrontend http(service);
  spdlog::info("listening on {}:{}", host, port);
  if (!http.listen(host, port)) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Material recommendation for CAD assemblies with graph neural networks", "matgraph"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_option("--seed", g.seed, "Seed for splits, initialisation and sampling");
  app.add_option("--out-dir", g.out_dir, "Output directory (falls back to $MATGRAPH_OUT)");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  app.add_option("--jobs", g.jobs, "Worker threads for per-assembly and per-run work")->check(CLI::PositiveNumber);

  std::function<int()> action;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic assembly corpus");
  std::string synth_kind = "planted";
  int synth_graphs = 200;
  double synth_test = 0.2, synth_default = 0.1;
  synth->add_option("--kind", synth_kind, "planted, homophily or taxonomy")
      ->check(CLI::IsMember({"planted", "homophily", "taxonomy"}));
  synth->add_option("--graphs", synth_graphs, "Number of assemblies")->check(CLI::PositiveNumber);
  synth->add_option("--test-fraction", synth_test, "Fraction of ids in the test manifest")->check(CLI::Range(0.0, 0.99));
  synth->add_option("--default-name-rate", synth_default, "Share of default-named bodies (planted)")
      ->check(CLI::Range(0.0, 1.0));
  synth->callback([&] { action = [&] { return run_synth(g, synth_kind, synth_graphs, synth_test, synth_default); }; });

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse assemblies, drop default-only ones, write records.json");
  std::string ingest_dir, ingest_catalog;
  ingest->add_option("--assemblies", ingest_dir, "Directory of assembly JSON files")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--catalog", ingest_catalog, "Material catalog JSON")->required()->check(CLI::ExistingFile);
  ingest->callback([&] { action = [&] { return run_ingest(g, ingest_dir, ingest_catalog); }; });

  // build-graphs
  auto* build = app.add_subcommand("build-graphs", "Fit encoders on the training split and write graph bundles");
  std::string build_records, build_catalog, build_split, build_semantic, build_visual;
  std::string build_pattern = kDefaultNamePattern;
  build->add_option("--records", build_records, "records.json from ingest")->required()->check(CLI::ExistingFile);
  build->add_option("--catalog", build_catalog, "Material catalog JSON")->required()->check(CLI::ExistingFile);
  build->add_option("--split", build_split, "Split manifest {seed, test_ids}")->required()->check(CLI::ExistingFile);
  build->add_option("--semantic", build_semantic, "Word embedding table (DIM header, token<TAB>values)")
      ->check(CLI::ExistingFile);
  build->add_option("--visual", build_visual, "Visual embedding table keyed by body uuid")->check(CLI::ExistingFile);
  build->add_option("--name-pattern", build_pattern, "Case-insensitive regex for default names");
  build->callback([&] {
    action = [&] {
      return run_build(g, build_records, build_catalog, build_split, build_semantic, build_visual, build_pattern);
    };
  });

  // stats
  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  std::string stats_corpus;
  stats->add_option("--corpus", stats_corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  stats->callback([&] { action = [&] { return run_stats(g, stats_corpus); }; });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model and write a checkpoint");
  std::string train_corpus;
  ModelFlags train_model;
  TrainFlags train_flags;
  InputProtocol train_protocol;
  bool train_hide_context = false;
  train_cmd->add_option("--corpus", train_corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  train_model.add(train_cmd);
  train_flags.add(train_cmd, false);
  train_cmd->add_option("--context-ratio", train_protocol.context_ratio, "Share of nodes given as context (0: none)")
      ->check(CLI::Range(0.0, 0.99));
  train_cmd->add_flag("--hide-context", train_hide_context, "Zero the label block of context nodes");
  train_cmd->add_option("--tier-depth", train_protocol.tier_depth, "Material tiers given as input")->check(CLI::Range(0, 3));
  train_cmd->add_option("--ablate", train_protocol.ablate_blocks, "Node feature block to drop (repeatable)");
  train_cmd->add_option("--ablate-edges", train_protocol.ablate_edges, "Edge kind to drop, or none")
      ->check(CLI::IsMember({"none", "Contact", "Joint", "Hierarchical"}));
  train_cmd->callback([&] {
    train_protocol.reveal_context = !train_hide_context;
    action = [&] { return run_train(g, train_corpus, train_model, train_flags, train_protocol); };
  });

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a corpus split");
  std::string eval_corpus, eval_ckpt, eval_split = "test";
  int eval_k = 3;
  eval_cmd->add_option("--corpus", eval_corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", eval_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--max-k", eval_k, "Largest k for top-k metrics")->check(CLI::PositiveNumber);
  eval_cmd->callback([&] { action = [&] { return run_evaluate(g, eval_corpus, eval_ckpt, eval_split, eval_k); }; });

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Feature ablation table (node blocks x edge modes)");
  std::string ablate_corpus;
  ExperimentOptions ablate_opt;
  ModelFlags ablate_model;
  TrainFlags ablate_flags;
  ablate->add_option("--corpus", ablate_corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  ablate->add_option("--blocks", ablate_opt.blocks, "Node blocks to ablate one at a time")->delimiter(',');
  ablate->add_option("--edge-modes", ablate_opt.edge_modes, "none or a connection kind")->delimiter(',');
  ablate_model.add(ablate);
  ablate_flags.add(ablate, true);
  ablate->callback([&] {
    action = [&] { return run_experiment(g, "ablation", ablate_corpus, ablate_opt, ablate_model, ablate_flags); };
  });

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run an evaluation protocol");
  std::string exp_protocol, exp_corpus;
  ExperimentOptions exp_opt;
  ModelFlags exp_model;
  TrainFlags exp_flags;
  bool exp_hide_context = false;
  exp->add_option("protocol", exp_protocol, "fully, partial or user")
      ->required()
      ->check(CLI::IsMember({"fully", "partial", "user"}));
  exp->add_option("--corpus", exp_corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  exp->add_option("--ratios", exp_opt.ratios, "Context ratios (partial)")->delimiter(',');
  exp->add_option("--layer-grid", exp_opt.layers, "Layer counts (partial)")->delimiter(',');
  exp->add_option("--depths", exp_opt.depths, "Tier depths (user)")->delimiter(',');
  exp->add_option("--ks", exp_opt.ks, "Top-k values")->delimiter(',');
  exp->add_flag("--hide-context", exp_hide_context, "Zero the label block of context nodes (partial)");
  exp_model.add(exp);
  exp_flags.add(exp, true);
  exp->callback([&] {
    exp_opt.reveal_context = !exp_hide_context;
    action = [&] { return run_experiment(g, exp_protocol, exp_corpus, exp_opt, exp_model, exp_flags); };
  });

  // grid
  auto* grid = app.add_subcommand("grid", "Grid search over layers, hidden width and layer kind");
  std::string grid_corpus, grid_kinds = "sage_mean";
  std::vector<int> grid_layers{1, 2, 3, 4, 5, 6, 7, 8}, grid_hidden{64, 128, 256, 512};
  ModelFlags grid_model;
  TrainFlags grid_flags;
  grid->add_option("--corpus", grid_corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  grid->add_option("--layer-grid", grid_layers, "Layer counts")->delimiter(',');
  grid->add_option("--hidden-grid", grid_hidden, "Hidden widths")->delimiter(',');
  grid->add_option("--kinds", grid_kinds, "Comma-separated layer kinds");
  grid_flags.add(grid, true);
  grid->callback([&] {
    action = [&] { return run_grid(g, grid_corpus, grid_model, grid_flags, grid_layers, grid_hidden, grid_kinds); };
  });

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP inference service");
  std::string serve_host = "127.0.0.1", serve_ckpt, serve_catalog, serve_semantic, serve_cache, serve_cors = "*";
  int serve_port = 8080;
  bool serve_no_filter = false;
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "TCP port")->check(CLI::Range(1, 65535));
  serve->add_option("--checkpoint", serve_ckpt, "Checkpoint to load at start")->check(CLI::ExistingFile);
  serve->add_option("--catalog", serve_catalog, "Catalog overriding the checkpoint's")->check(CLI::ExistingFile);
  serve->add_option("--semantic", serve_semantic, "Word embedding table overriding the checkpoint's path")
      ->check(CLI::ExistingFile);
  serve->add_option("--graph-cache", serve_cache, "Directory persisting uploaded graphs");
  serve->add_option("--cors-origin", serve_cors, "Access-Control-Allow-Origin value");
  serve->add_flag("--no-tier-filter", serve_no_filter, "Use tier constraints as inputs only");
  serve->callback([&] {
    action = [&] {
      return run_serve(serve_host, serve_port, serve_ckpt, serve_catalog, serve_semantic, serve_cache, serve_cors,
                       serve_no_filter);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (app.get_option("--out-dir")->count() == 0)
    if (const char* env = std::getenv("MATGRAPH_OUT"); env && *env) g.out_dir = env;

  auto logger = spdlog::stderr_color_mt("matgraph");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    return action();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
