#include "matgraph/corpus.hpp"

#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

#include "matgraph/errors.hpp"
#include "matgraph/util.hpp"

namespace matgraph {

AssemblyRecords records_from_assembly(const RawAssembly& a) {
  AssemblyRecords r;
  r.assembly_id = a.assembly_id;
  r.bodies = extract_bodies(a);
  r.connections = extract_connections(a, r.bodies);
  r.meta = a.meta;
  return r;
}

IngestResult ingest_assemblies(const std::vector<RawAssembly>& assemblies, const MaterialCatalog& catalog) {
  IngestResult out;
  out.parsed = assemblies.size();
  std::set<std::string> seen;
  for (const auto& a : assemblies) {
    if (a.assembly_id.empty()) throw SchemaError("assembly without an assembly_id");
    if (!seen.insert(a.assembly_id).second) throw SchemaError("duplicate assembly id " + a.assembly_id);
    AssemblyRecords r = records_from_assembly(a);
    if (is_default_only(r.bodies, catalog)) {
      out.dropped.push_back({a.assembly_id, "default material only"});
    } else {
      out.kept.push_back(std::move(r));
    }
  }
  std::sort(out.kept.begin(), out.kept.end(),
            [](const auto& x, const auto& y) { return x.assembly_id < y.assembly_id; });
  std::sort(out.dropped.begin(), out.dropped.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  return out;
}

std::vector<RawAssembly> load_assembly_directory(const std::filesystem::path& dir, int jobs) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<RawAssembly> out(files.size());
  parallel_for(files.size(), jobs, [&](std::size_t i) {
    try {
      out[i] = parse_assembly(read_text_file(files[i]));
    } catch (const ParseError& e) {
      throw ParseError(files[i].filename().string() + ": " + e.what(), e.offset());
    } catch (const SchemaError& e) {
      throw SchemaError(files[i].filename().string() + ": " + e.what());
    }
    if (out[i].assembly_id.empty()) out[i].assembly_id = files[i].stem().string();
  });
  return out;
}

json records_to_json(const IngestResult& r) {
  json kept = json::array();
  for (const auto& a : r.kept) {
    json bodies = json::array(), conns = json::array();
    for (const auto& b : a.bodies) bodies.push_back(body_record_to_json(b));
    for (const auto& c : a.connections) conns.push_back({{"src", c.src}, {"dst", c.dst}, {"kind", to_string(c.kind)}});
    kept.push_back({{"assembly_id", a.assembly_id},
                    {"bodies", std::move(bodies)},
                    {"connections", std::move(conns)},
                    {"meta", meta_to_json(a.meta)}});
  }
  json dropped = json::array();
  for (const auto& d : r.dropped) dropped.push_back({{"id", d.id}, {"reason", d.reason}});
  return {{"parsed", r.parsed},
          {"kept_count", r.kept.size()},
          {"dropped_count", r.dropped.size()},
          {"assemblies", std::move(kept)},
          {"dropped", std::move(dropped)}};
}

IngestResult records_from_json(const json& doc) {
  IngestResult r;
  try {
    r.parsed = doc.at("parsed").get<std::size_t>();
    for (const auto& a : doc.at("assemblies")) {
      AssemblyRecords rec;
      rec.assembly_id = a.at("assembly_id").get<std::string>();
      for (const auto& b : a.at("bodies")) rec.bodies.push_back(body_record_from_json(b));
      for (const auto& c : a.at("connections"))
        rec.connections.push_back({c.at("src").get<std::string>(), c.at("dst").get<std::string>(),
                                   connection_kind_from_string(c.at("kind").get<std::string>())});
      rec.meta = meta_from_json(a.at("meta"));
      r.kept.push_back(std::move(rec));
    }
    for (const auto& d : doc.at("dropped")) r.dropped.push_back({d.at("id"), d.at("reason")});
  } catch (const json::exception& e) {
    throw SchemaError(std::string("invalid records file: ") + e.what());
  }
  return r;
}

// ---- corpus -----------------------------------------------------------

const AssemblyGraph& Corpus::get(const std::string& id) const {
  auto it = std::lower_bound(graphs.begin(), graphs.end(), id,
                             [](const AssemblyGraph& g, const std::string& k) { return g.graph_id < k; });
  if (it == graphs.end() || it->graph_id != id) throw ManifestError("graph '" + id + "' is not in the corpus");
  return *it;
}

std::vector<const AssemblyGraph*> Corpus::subset(const std::vector<std::string>& ids) const {
  std::vector<const AssemblyGraph*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(&get(id));
  return out;
}

std::vector<const AssemblyGraph*> Corpus::all() const {
  std::vector<const AssemblyGraph*> out;
  for (const auto& g : graphs) out.push_back(&g);
  return out;
}

Corpus build_corpus(const std::vector<AssemblyRecords>& records, const MaterialCatalog& catalog,
                    const BuildOptions& options) {
  Corpus c;
  c.manifest = options.manifest;
  std::vector<const AssemblyRecords*> valid;
  for (const auto& r : records) {
    if (r.bodies.size() < 3) {
      c.dropped.push_back({r.assembly_id, "too few nodes"});
    } else if (r.connections.size() < 2) {
      c.dropped.push_back({r.assembly_id, "too few edges"});
    } else {
      valid.push_back(&r);
    }
  }
  std::sort(valid.begin(), valid.end(), [](auto* a, auto* b) { return a->assembly_id < b->assembly_id; });
  std::vector<std::string> ids;
  for (auto* r : valid) ids.push_back(r->assembly_id);
  c.split = split_dataset(ids, options.manifest);
  if (c.split.train.empty()) throw ConfigError("training split is empty");

  const std::set<std::string> train(c.split.train.begin(), c.split.train.end());
  std::vector<std::vector<BodyRecord>> train_bodies;
  std::vector<AssemblyMeta> train_metas;
  std::map<std::string, std::int64_t> counts;
  for (auto* r : valid) {
    if (!train.count(r->assembly_id)) continue;
    train_bodies.push_back(r->bodies);
    train_metas.push_back(r->meta);
    for (const auto& b : r->bodies) ++counts[resolve_material(b, catalog).material_id];
  }
  FittedState st = fit_state(train_bodies, train_metas, counts, catalog);
  st.imputation_seed = options.imputation_seed;
  st.default_name_pattern = options.name_pattern;
  st.semantic_table = options.semantic_path;
  st.visual_table = options.visual_path;
  if (options.semantic) st.semantic_dim = options.semantic->dim();
  if (options.visual) st.visual_dim = options.visual->dim();

  const FeatureEncoder encoder(st, options.semantic, options.visual);
  c.state = st;
  c.schema = encoder.base_schema();
  c.graphs.resize(valid.size());
  parallel_for(valid.size(), options.jobs, [&](std::size_t i) {
    const auto& r = *valid[i];
    c.graphs[i] = build_graph(r.assembly_id, r.bodies, r.connections, r.meta, encoder);
  });
  std::sort(c.dropped.begin(), c.dropped.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  return c;
}

json corpus_manifest(const Corpus& c) {
  std::vector<std::string> ids;
  for (const auto& g : c.graphs) ids.push_back(g.graph_id);
  json dropped = json::array();
  for (const auto& d : c.dropped) dropped.push_back({{"id", d.id}, {"reason", d.reason}});
  return {
      {"schema", c.schema.to_json()},
      {"fitted_state", c.state.to_json()},
      {"split", {{"seed", c.manifest.seed}, {"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}},
      {"graphs", ids},
      {"dropped", std::move(dropped)},
  };
}

void write_corpus(const std::filesystem::path& dir, const Corpus& c) {
  std::filesystem::create_directories(dir / "graphs");
  for (const auto& g : c.graphs) write_text_file(dir / "graphs" / (g.graph_id + ".json"), graph_to_json(g).dump());
  write_text_file(dir / "manifest.json", corpus_manifest(c).dump(2) + "\n");
}

Corpus load_corpus(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw ConfigError("no manifest.json in " + dir.string());
  json m;
  try {
    m = json::parse(read_text_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw ParseError("manifest.json: " + std::string(e.what()), e.byte);
  }
  Corpus c;
  try {
    c.schema = FeatureSchema::from_json(m.at("schema"));
    c.state = FittedState::from_json(m.at("fitted_state"));
    const auto& s = m.at("split");
    c.manifest.seed = s.at("seed").get<std::uint64_t>();
    c.split.train = s.at("train").get<std::vector<std::string>>();
    c.split.val = s.at("val").get<std::vector<std::string>>();
    c.split.test = s.at("test").get<std::vector<std::string>>();
    c.manifest.test_ids = c.split.test;
    for (const auto& d : m.at("dropped")) c.dropped.push_back({d.at("id"), d.at("reason")});
    auto ids = m.at("graphs").get<std::vector<std::string>>();
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) {
      AssemblyGraph g = graph_from_json(json::parse(read_text_file(dir / "graphs" / (id + ".json"))));
      if (!(g.schema == c.schema)) throw SchemaError("graph " + id + " schema differs from the corpus manifest");
      c.graphs.push_back(std::move(g));
    }
  } catch (const json::exception& e) {
    throw SchemaError("invalid corpus manifest: " + std::string(e.what()));
  }
  return c;
}

}  // namespace matgraph
