#include "matgraph/service.hpp"

#include <algorithm>
#include <numeric>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "matgraph/corpus.hpp"
#include "matgraph/errors.hpp"
#include "matgraph/metrics.hpp"
#include "matgraph/model.hpp"
#include "matgraph/util.hpp"

namespace matgraph {

namespace {

std::string hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

Reply fail(int status, const std::string& code, const std::string& message) {
  return {status, error_body(code, message)};
}

const Reply kNoModel{503, {{"error", "no_model"}, {"message", "no checkpoint loaded"}}};

json model_meta(const ModelSnapshot& m) {
  return {{"checkpoint_id", m.checkpoint_id}, {"schema_hash", m.checkpoint.schema.digest()}};
}

std::shared_ptr<const EmbeddingTable> table_from(const std::shared_ptr<const EmbeddingTable>& override_table,
                                                 const std::string& path, std::size_t dim) {
  if (override_table) return override_table;
  if (!path.empty() && std::filesystem::exists(path)) {
    auto t = std::make_shared<EmbeddingTable>(EmbeddingTable::load(path));
    if (t->dim() != dim) throw SchemaError("embedding table " + path + " has the wrong dimension");
    return t;
  }
  return nullptr;
}

/// Tier depth whose block width matches `width`; -1 when none does.
int depth_for_width(const TierVocabulary& tiers, std::size_t width) {
  for (int d = 1; d <= 3; ++d)
    if (tiers.width(d) == width) return d;
  return -1;
}

/// Adds or removes blocks so that `g` carries exactly the checkpoint schema.
AssemblyGraph conform(AssemblyGraph g, const FeatureSchema& target, std::size_t num_classes,
                      const std::vector<std::string>& known_materials, const ModelSnapshot& m) {
  std::vector<std::string> extra;
  for (const auto& b : g.schema.blocks())
    if (!target.has(b.name) && b.ablatable) extra.push_back(b.name);
  for (const auto& name : extra) g = apply_node_ablation(g, name);
  for (const auto& b : target.blocks()) {
    if (g.schema.has(b.name)) continue;
    if (b.name == block::kMaterialOnehot) {
      g = add_material_block(g, num_classes);
    } else if (b.name == block::kTierOnehot) {
      const int depth = depth_for_width(m.checkpoint.state.tiers, b.width);
      if (depth < 0) break;
      // Known materials fill their own tier rows; everything else starts at zero.
      g.material_ids = known_materials;
      g = inject_tier_features(g, depth, m.catalog, m.checkpoint.state.tiers);
    }
  }
  return g;
}

bool tier_prefix_matches(const std::array<std::string, 3>& tiers, const std::vector<std::string>& constraint) {
  for (std::size_t l = 0; l < constraint.size(); ++l)
    if (tiers[l] != constraint[l]) return false;
  return true;
}

}  // namespace

json error_body(const std::string& code, const std::string& message) {
  return {{"error", code}, {"message", message}};
}

InferenceService::InferenceService(ServiceOptions options) : options_(std::move(options)) {
  if (!options_.graph_cache.empty() && std::filesystem::is_directory(options_.graph_cache)) {
    for (const auto& entry : std::filesystem::directory_iterator(options_.graph_cache)) {
      if (entry.path().extension() != ".json") continue;
      try {
        graphs_[entry.path().stem().string()] =
            std::make_shared<const RawAssembly>(parse_assembly(read_text_file(entry.path())));
      } catch (const Error& e) {
        spdlog::warn("skipping cached graph {}: {}", entry.path().string(), e.what());
      }
    }
  }
}

std::shared_ptr<const ModelSnapshot> InferenceService::snapshot() const {
  std::lock_guard lock(model_mutex_);
  return model_;
}

Reply InferenceService::load_model(std::string_view request_body) {
  json doc = json::parse(request_body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("path") || !doc["path"].is_string())
    return fail(400, "bad_request", "expected {\"path\": \"<checkpoint file>\"}");
  return load_model_path(doc["path"].get<std::string>());
}

Reply InferenceService::load_model_path(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) return fail(404, "not_found", "no checkpoint at " + path.string());
  auto snap = std::make_shared<ModelSnapshot>();
  try {
    snap->checkpoint = load_checkpoint(path);
    snap->checkpoint_id = snap->checkpoint.id();
    snap->path = path.string();
    snap->catalog = options_.catalog ? *options_.catalog : snap->checkpoint.state.catalog;
    const FittedState& st = snap->checkpoint.state;
    snap->encoder = std::make_shared<FeatureEncoder>(
        st, table_from(options_.semantic, st.semantic_table, st.semantic_dim),
        table_from(options_.visual, st.visual_table, st.visual_dim));
  } catch (const Error& e) {
    return fail(400, "invalid_checkpoint", e.what());
  }
  {
    std::lock_guard lock(model_mutex_);
    model_ = snap;
  }
  spdlog::info("loaded checkpoint {} ({})", snap->checkpoint_id, snap->path);
  return model_info();
}

Reply InferenceService::model_info() const {
  const auto m = snapshot();
  if (!m) return kNoModel;
  json body = model_meta(*m);
  body["path"] = m->path;
  body["model"] = m->checkpoint.model.to_json();
  body["schema"] = m->checkpoint.schema.to_json();
  body["classes"] = m->checkpoint.state.labels.classes;
  body["tiers"] = m->checkpoint.state.tiers.tiers;
  body["training"] = m->checkpoint.training;
  body["tier_filter"] = options_.tier_filter;
  return {200, body};
}

Reply InferenceService::upload_graph(std::string_view request_body) {
  RawAssembly a;
  try {
    json doc = json::parse(request_body);
    if (doc.is_object() && doc.contains("assembly")) doc = doc["assembly"];
    a = assembly_from_json(doc);
  } catch (const json::exception& e) {
    return fail(400, "invalid_json", e.what());
  } catch (const Error& e) {
    return fail(400, "invalid_assembly", e.what());
  }
  const std::string canonical = assembly_to_json(a).dump();
  const std::string id = "g-" + hex16(fnv1a64(canonical));
  const auto bodies = extract_bodies(a);
  {
    std::lock_guard lock(graphs_mutex_);
    graphs_[id] = std::make_shared<const RawAssembly>(a);
  }
  if (!options_.graph_cache.empty()) write_text_file(options_.graph_cache / (id + ".json"), canonical + "\n");
  json node_ids = json::array();
  for (const auto& b : bodies) node_ids.push_back(b.uuid);
  return {200, {{"graph_id", id}, {"assembly_id", a.assembly_id}, {"num_nodes", bodies.size()}, {"node_ids", node_ids}}};
}

std::shared_ptr<const RawAssembly> InferenceService::find_graph(const std::string& id) const {
  std::lock_guard lock(graphs_mutex_);
  auto it = graphs_.find(id);
  return it == graphs_.end() ? nullptr : it->second;
}

Reply InferenceService::graph_info(const std::string& id) const {
  const auto a = find_graph(id);
  if (!a) return fail(404, "not_found", "unknown graph id " + id);
  const auto rec = records_from_assembly(*a);
  json nodes = json::array(), edges = json::array();
  for (const auto& b : rec.bodies)
    nodes.push_back({{"node_id", b.uuid},
                     {"body_name", b.body_name},
                     {"occurrence_name", b.occurrence_name},
                     {"area", b.area},
                     {"volume", b.volume},
                     {"material_id", b.physical_material_id}});
  for (const auto& c : rec.connections) edges.push_back({{"src", c.src}, {"dst", c.dst}, {"kind", to_string(c.kind)}});
  return {200, {{"graph_id", id}, {"assembly_id", a->assembly_id}, {"nodes", nodes}, {"edges", edges}}};
}

Reply InferenceService::predict(std::string_view request_body) const {
  const auto m = snapshot();
  if (!m) return kNoModel;
  const json doc = json::parse(request_body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return fail(400, "invalid_json", "request body must be a JSON object");

  const FittedState& st = m->checkpoint.state;
  const std::size_t C = st.labels.size();

  // Graph payload: inline assembly, prebuilt bundle, or an uploaded id.
  AssemblyGraph g;
  try {
    if (doc.contains("assembly")) {
      const RawAssembly a = assembly_from_json(doc["assembly"]);
      const auto rec = records_from_assembly(a);
      if (rec.bodies.empty()) return fail(400, "empty_graph", "assembly has no visible bodies");
      g = build_graph(a.assembly_id, rec.bodies, rec.connections, rec.meta, *m->encoder);
    } else if (doc.contains("graph_id")) {
      const auto a = find_graph(doc["graph_id"].get<std::string>());
      if (!a) return fail(404, "not_found", "unknown graph id");
      const auto rec = records_from_assembly(*a);
      if (rec.bodies.empty()) return fail(400, "empty_graph", "assembly has no visible bodies");
      g = build_graph(doc["graph_id"].get<std::string>(), rec.bodies, rec.connections, rec.meta, *m->encoder);
    } else if (doc.contains("graph")) {
      g = graph_from_json(doc["graph"]);
      g.check();
    } else {
      return fail(400, "bad_request", "request needs one of assembly, graph_id or graph");
    }
  } catch (const json::exception& e) {
    return fail(400, "invalid_payload", e.what());
  } catch (const Error& e) {
    return fail(400, "invalid_payload", e.what());
  }
  if (g.num_nodes() == 0) return fail(400, "empty_graph", "graph has no nodes");

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) index[g.node_ids[i]] = i;

  // Request constraints.
  int k = static_cast<int>(std::min<std::size_t>(3, C));
  std::vector<std::string> known(g.num_nodes());
  std::vector<std::int32_t> known_label(g.num_nodes(), -1);
  std::vector<std::optional<std::vector<std::string>>> constraint(g.num_nodes());
  bool filter = options_.tier_filter;
  try {
    if (doc.contains("k")) {
      if (!doc["k"].is_number_integer()) return fail(400, "bad_request", "k must be an integer");
      k = doc["k"].get<int>();
      if (k < 1 || std::size_t(k) > C) return fail(400, "bad_request", "k must be in 1.." + std::to_string(C));
    }
    if (doc.contains("filter")) filter = doc["filter"].get<bool>();
    // Named copies: items() over a temporary would dangle.
    const json known_in = doc.value("known_materials", json::object());
    const json tiers_in = doc.value("tier_constraints", json::object());
    for (const auto& [node, mat] : known_in.items()) {
      auto it = index.find(node);
      if (it == index.end()) return fail(400, "unknown_node", "unknown node id " + node);
      const std::string id = mat.get<std::string>();
      if (!m->catalog.contains(id)) return fail(422, "unknown_material", "unknown material id " + id);
      known[it->second] = id;
      known_label[it->second] = st.labels.index_of(id);
    }
    for (const auto& [node, tiers] : tiers_in.items()) {
      auto it = index.find(node);
      if (it == index.end()) return fail(400, "unknown_node", "unknown node id " + node);
      std::vector<std::string> path = tiers.is_string() ? std::vector<std::string>{tiers.get<std::string>()}
                                                        : tiers.get<std::vector<std::string>>();
      if (path.empty() || path.size() > 3) return fail(400, "bad_request", "tier constraint needs 1 to 3 names");
      for (std::size_t l = 0; l < path.size(); ++l) {
        const auto& vocab = st.tiers.tiers[l];
        if (std::find(vocab.begin(), vocab.end(), path[l]) == vocab.end())
          return fail(422, "unknown_tier", "unknown tier-" + std::to_string(l + 1) + " name " + path[l]);
      }
      constraint[it->second] = std::move(path);
    }
  } catch (const json::exception& e) {
    return fail(400, "bad_request", e.what());
  }

  // Build the checkpoint's input layout and write the user-supplied blocks.
  try {
    g = conform(std::move(g), m->checkpoint.schema, C, known, *m);
    if (g.schema.has(block::kMaterialOnehot)) {
      g = set_known_labels(g, known_label);
    } else {
      for (std::size_t i = 0; i < g.num_nodes(); ++i) g.target_mask[i] = known[i].empty() ? 1 : 0;
    }
    if (const FeatureBlock* tb = g.schema.find(block::kTierOnehot)) {
      const int depth = depth_for_width(st.tiers, tb->width);
      for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        if (!constraint[i] || !known[i].empty()) continue;
        float* row = g.x.row(i) + tb->offset;
        std::size_t offset = 0;
        for (int l = 0; l < depth; ++l) {
          const auto& vocab = st.tiers.tiers[l];
          if (std::size_t(l) < constraint[i]->size()) {
            const auto pos = std::find(vocab.begin(), vocab.end(), (*constraint[i])[l]) - vocab.begin();
            row[offset + pos] = 1.0f;
          }
          offset += vocab.size();
        }
      }
    }
  } catch (const Error& e) {
    return fail(400, "schema_mismatch", e.what());
  }
  if (!(g.schema == m->checkpoint.schema))
    return fail(400, "schema_mismatch", "request features " + g.schema.digest() + " do not match checkpoint schema " +
                                            m->checkpoint.schema.digest());

  const auto probs = predict_probs(m->checkpoint.params, m->checkpoint.model, GraphInput<float>::from(g));

  auto display = [&](const std::string& id) {
    auto it = m->catalog.entries.find(id);
    return it == m->catalog.entries.end() ? std::string("Other") : it->second.display_name;
  };
  json nodes = json::array();
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    json node = {{"node_id", g.node_ids[i]}};
    if (!known[i].empty()) {
      node["known"] = true;
      node["material_id"] = known[i];
      node["display_name"] = display(known[i]);
      nodes.push_back(std::move(node));
      continue;
    }
    node["known"] = false;
    const RankedRow ranked = rank_row(probs.row(i), C);
    std::vector<std::pair<std::int32_t, double>> kept;
    const bool filtered = filter && constraint[i].has_value();
    for (std::size_t r = 0; r < C; ++r) {
      const std::int32_t c = ranked.labels[r];
      const std::string& id = st.labels.classes[c];
      if (filtered && (!m->catalog.contains(id) || !tier_prefix_matches(m->catalog.tiers(id), *constraint[i])))
        continue;
      kept.emplace_back(c, ranked.probs[r]);
    }
    if (filtered) {
      double total = 0.0;
      for (const auto& kv : kept) total += kv.second;
      for (auto& kv : kept) kv.second = total > 0.0 ? kv.second / total : 1.0 / double(kept.size());
      node["tier_constraint"] = *constraint[i];
    }
    json candidates = json::array();
    for (std::size_t r = 0; r < kept.size() && r < std::size_t(k); ++r) {
      const std::string& id = st.labels.classes[kept[r].first];
      candidates.push_back({{"material_id", id}, {"display_name", display(id)}, {"probability", kept[r].second}});
    }
    node["filtered"] = filtered;
    node["candidates"] = std::move(candidates);
    nodes.push_back(std::move(node));
  }
  return {200, {{"model", model_meta(*m)}, {"graph_id", g.graph_id}, {"k", k}, {"nodes", nodes}}};
}

// ---- HTTP binding ----------------------------------------------------------

struct HttpFrontend::Impl {
  InferenceService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(InferenceService& s) : service(s) {
    const std::string origin = s.options().cors_origin;
    server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    auto send = [](httplib::Response& res, const Reply& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Get("/v1/model", [&, send](const httplib::Request&, httplib::Response& res) { send(res, service.model_info()); });
    server.Post("/v1/model", [&, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.load_model(req.body));
    });
    server.Post("/v1/graphs", [&, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.upload_graph(req.body));
    });
    server.Get(R"(/v1/graphs/([A-Za-z0-9_-]+))", [&, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.graph_info(req.matches[1]));
    });
    server.Post("/v1/predict", [&, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.predict(req.body));
    });
    server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      send(res, {500, error_body("internal", what)});
    });
  }
};

HttpFrontend::HttpFrontend(InferenceService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool HttpFrontend::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

void HttpFrontend::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace matgraph
