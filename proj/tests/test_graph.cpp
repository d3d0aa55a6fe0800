#include <doctest.h>

#include <map>
#include <numeric>
#include <random>
#include <set>

#include "matgraph/graph.hpp"
#include "matgraph/synth.hpp"
#include "matgraph/util.hpp"
#include "support.hpp"

using namespace matgraph;
using testing::fixture;
using testing::toy_graph;

namespace {

struct Gearbox {
  MaterialCatalog catalog;
  std::vector<BodyRecord> bodies;
  std::vector<ConnectionRecord> connections;
  std::unique_ptr<FeatureEncoder> encoder;
  AssemblyGraph graph;
};

Gearbox gearbox() {
  Gearbox g;
  g.catalog = parse_catalog(read_text_file(fixture("catalog.json")));
  RawAssembly a = parse_assembly(read_text_file(fixture("gearbox.json")));
  g.bodies = extract_bodies(a);
  g.connections = extract_connections(a, g.bodies);
  std::map<std::string, std::int64_t> counts;
  for (const auto& b : g.bodies) counts[resolve_material(b, g.catalog).material_id]++;
  auto state = fit_state({g.bodies}, {a.meta}, counts, g.catalog);
  g.encoder = std::make_unique<FeatureEncoder>(state, nullptr, nullptr);
  g.graph = build_graph("gearbox", g.bodies, g.connections, a.meta, *g.encoder);
  return g;
}

std::size_t count_kind(const AssemblyGraph& g, ConnectionKind k) {
  std::size_t n = 0;
  for (std::size_t e = 0; e < g.num_edges(); ++e) n += g.edge_attr.at(e, static_cast<std::size_t>(k)) == 1.0f;
  return n;
}

void check_reverse_partners(const AssemblyGraph& g) {
  std::multiset<std::tuple<int, int, int>> edges;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    int kind = 0;
    while (g.edge_attr.at(e, kind) != 1.0f) ++kind;
    edges.insert({g.edge_src[e], g.edge_dst[e], kind});
  }
  for (const auto& [u, v, k] : edges) CHECK(edges.count({u, v, k}) == edges.count({v, u, k}));
}

AssemblyGraph with_materials(AssemblyGraph g, std::size_t classes) { return add_material_block(g, classes); }

}  // namespace

TEST_CASE("gearbox graph shape") {
  auto gb = gearbox();
  const auto& g = gb.graph;
  CHECK(g.num_nodes() == 6);
  CHECK(g.x.rows == 6);
  std::size_t widths = 0;
  for (const auto& b : g.schema.blocks()) widths += b.width;
  CHECK(g.x.cols == widths);
  CHECK(g.x.cols == 2 * kSemanticDim + 5 + 2 + kVisualDim + kGlobalScalarWidth + 1 + 1 + 2);
  CHECK(g.num_edges() == 12);
  CHECK(count_kind(g, ConnectionKind::Contact) == 6);
  CHECK(count_kind(g, ConnectionKind::Joint) == 2);
  CHECK(count_kind(g, ConnectionKind::Hierarchical) == 4);
  check_reverse_partners(g);
  CHECK(validate_graph(g).keep);
  // B5 resolves through its chrome appearance
  auto it = std::find(g.node_ids.begin(), g.node_ids.end(), "B5");
  CHECK(g.material_ids[it - g.node_ids.begin()] == "Prism-Chrome");
}

TEST_CASE("bidirectional edges, parallel edges preserved") {
  auto g = toy_graph(3, {{0, 1}, {1, 2}}, 4, 2, 1, {ConnectionKind::Contact, ConnectionKind::Joint});
  CHECK(g.num_edges() == 4);
  auto p = toy_graph(2, {{0, 1}, {0, 1}}, 4, 2, 1);
  CHECK(p.num_edges() == 4);
  check_reverse_partners(p);
}

TEST_CASE("discard rule boundaries") {
  CHECK(validate_graph(toy_graph(2, {{0, 1}, {0, 1}, {0, 1}, {1, 0}, {0, 1}}, 4, 2, 1)).reason == "too few nodes");
  CHECK(validate_graph(toy_graph(3, {{0, 1}}, 4, 2, 1)).reason == "too few edges");
  CHECK_FALSE(validate_graph(toy_graph(3, {{0, 1}}, 4, 2, 1)).keep);
  CHECK(validate_graph(toy_graph(3, {{0, 1}, {1, 2}}, 4, 2, 1)).keep);
}

TEST_CASE("node ablation width bookkeeping") {
  auto gb = gearbox();
  const auto& g = gb.graph;
  auto geo = apply_node_ablation(g, block::kBodyGeometry);
  CHECK(g.x.cols - geo.x.cols == 512);
  CHECK(geo.x.cols == geo.schema.node_width());
  auto names = apply_node_ablation(g, block::kSemanticNames);
  CHECK(g.x.cols - names.x.cols == 1200);
  CHECK_FALSE(names.schema.has(block::kBodyName));
  // remaining columns are the untouched tail of each row
  const auto* phys = g.schema.find(block::kBodyPhysical);
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    CHECK(std::equal(names.x.row(i), names.x.row(i) + names.x.cols, g.x.row(i) + phys->offset));
  CHECK_THROWS_AS(apply_node_ablation(g, "nope"), ConfigError);
  auto withm = add_material_block(g, 4);
  CHECK_THROWS_AS(apply_node_ablation(withm, block::kMaterialOnehot), ConfigError);
  // ablating nothing leaves the bundle byte-identical
  CHECK(graph_to_json(AssemblyGraph(g)).dump() == graph_to_json(g).dump());
}

TEST_CASE("edge ablation") {
  auto hier_only = toy_graph(3, {{0, 1}, {1, 2}}, 4, 2, 1, {ConnectionKind::Hierarchical, ConnectionKind::Hierarchical});
  auto stripped = apply_edge_ablation(hier_only, ConnectionKind::Hierarchical);
  CHECK(stripped.num_edges() == 0);
  CHECK(stripped.edge_attr.rows == 0);
  CHECK_FALSE(validate_graph(stripped).keep);

  auto gb = gearbox();
  const auto& g = gb.graph;
  auto no_hier = apply_edge_ablation(g, ConnectionKind::Hierarchical);
  CHECK(no_hier.num_edges() == 8);
  CHECK(no_hier.edge_attr.rows == no_hier.num_edges());
  for (std::size_t e = 0; e < no_hier.num_edges(); ++e) CHECK(no_hier.edge_attr.at(e, 2) == 0.0f);
  check_reverse_partners(no_hier);
  auto no_contact = apply_edge_ablation(g, ConnectionKind::Contact);
  CHECK(count_kind(no_contact, ConnectionKind::Contact) == 0);
  CHECK(count_kind(no_contact, ConnectionKind::Joint) == count_kind(g, ConnectionKind::Joint));
  CHECK(count_kind(no_contact, ConnectionKind::Hierarchical) == count_kind(g, ConnectionKind::Hierarchical));
}

TEST_CASE("context sampling counts") {
  auto g4 = with_materials(toy_graph(4, {{0, 1}, {1, 2}, {2, 3}}, 4, 3, 2), 3);
  auto c = inject_context_labels(g4, 0.5, 7);
  CHECK(std::count(c.target_mask.begin(), c.target_mask.end(), 0) == 2);
  CHECK(std::count(c.target_mask.begin(), c.target_mask.end(), 1) == 2);
  auto g5 = with_materials(toy_graph(5, {{0, 1}, {1, 2}}, 4, 3, 2), 3);
  auto c5 = inject_context_labels(g5, 0.1, 7);
  CHECK(std::count(c5.target_mask.begin(), c5.target_mask.end(), 0) == 1);
  CHECK(inject_context_labels(g4, 0.5, 7).target_mask == c.target_mask);
  CHECK_THROWS_AS(inject_context_labels(g4, 0.0, 7), ConfigError);
  CHECK_THROWS_AS(inject_context_labels(toy_graph(4, {{0, 1}}, 4, 3, 2), 0.5, 7), ConfigError);
}

TEST_CASE("context property: masks partition nodes and blocks hold the truth") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 30;
    const double ratio = 0.05 + 0.9 * double(rng() % 1000) / 1000.0;
    auto g = with_materials(toy_graph(n, {}, 3, 4, rng()), 4);
    const bool reveal = trial % 2 == 0;
    auto c = inject_context_labels(g, ratio, rng(), reveal);
    const auto* b = c.schema.find(block::kMaterialOnehot);
    std::size_t context = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const float* row = c.x.row(i) + b->offset;
      const float total = std::accumulate(row, row + b->width, 0.0f);
      if (c.target_mask[i]) {
        CHECK(total == 0.0f);
      } else {
        ++context;
        CHECK(total == (reveal ? 1.0f : 0.0f));
        if (reveal) CHECK(row[c.y[i]] == 1.0f);
      }
    }
    const std::size_t expected = static_cast<std::size_t>(std::ceil(std::round(ratio * n * 1e9) / 1e9));
    CHECK(context == std::min(n, expected));
    // everything outside the material block is untouched
    for (std::size_t i = 0; i < n; ++i) CHECK(std::equal(g.x.row(i), g.x.row(i) + b->offset, c.x.row(i)));
  }
}

TEST_CASE("tier features") {
  auto gb = gearbox();
  const auto& st = gb.encoder->state();
  const auto& g = gb.graph;
  auto d0 = inject_tier_features(g, 0, st.catalog, st.tiers);
  CHECK(graph_to_json(d0).dump() == graph_to_json(g).dump());
  auto d1 = inject_tier_features(g, 1, st.catalog, st.tiers);
  auto d2 = inject_tier_features(g, 2, st.catalog, st.tiers);
  auto d3 = inject_tier_features(g, 3, st.catalog, st.tiers);
  CHECK(d2.x.cols - d1.x.cols == st.tiers.tiers[1].size());
  const auto* b = d3.schema.find(block::kTierOnehot);
  REQUIRE(b);
  // B4 is mild steel: Metal / Ferrous / Carbon Steel
  const auto i = std::find(g.node_ids.begin(), g.node_ids.end(), "B4") - g.node_ids.begin();
  auto expected = encode_tier("PrismMaterial-021", st.catalog, st.tiers, 3);
  CHECK(std::equal(expected.begin(), expected.end(), d3.x.row(i) + b->offset));
  const auto& t = st.tiers.tiers;
  const float* row = d3.x.row(i) + b->offset;
  CHECK(row[std::find(t[0].begin(), t[0].end(), "Metal") - t[0].begin()] == 1.0f);
  CHECK(row[t[0].size() + (std::find(t[1].begin(), t[1].end(), "Ferrous") - t[1].begin())] == 1.0f);
  CHECK(row[t[0].size() + t[1].size() + (std::find(t[2].begin(), t[2].end(), "Carbon Steel") - t[2].begin())] == 1.0f);
}

TEST_CASE("known labels override context") {
  auto g = with_materials(toy_graph(3, {{0, 1}, {1, 2}}, 3, 4, 9), 4);
  auto k = set_known_labels(g, {2, -1, -1});
  CHECK(k.target_mask == std::vector<std::uint8_t>{0, 1, 1});
  const auto* b = k.schema.find(block::kMaterialOnehot);
  CHECK(k.x.at(0, b->offset + 2) == 1.0f);
  CHECK_THROWS_AS(set_known_labels(g, {4, -1, -1}), ConfigError);
  CHECK_THROWS_AS(set_known_labels(g, {1}), ConfigError);
}

TEST_CASE("merge offsets node indices") {
  auto a = toy_graph(3, {{0, 1}, {1, 2}}, 4, 2, 1);
  auto b = toy_graph(4, {{0, 3}}, 4, 2, 2);
  auto m = merge_graphs({&a, &b});
  CHECK(m.num_nodes() == 7);
  CHECK(m.num_edges() == 6);
  CHECK(m.edge_src[4] == 3);
  CHECK(m.edge_dst[4] == 6);
  CHECK(std::equal(b.x.data.begin(), b.x.data.end(), m.x.row(3)));
  m.check();
}

TEST_CASE("bundle JSON round trip and validation") {
  auto gb = gearbox();
  auto g = inject_context_labels(add_material_block(gb.graph, gb.encoder->state().labels.size()), 0.5, 3);
  auto back = graph_from_json(json::parse(graph_to_json(g).dump()));
  CHECK(back == g);
  auto doc = graph_to_json(g);
  doc["edge_index"][0][0] = 99;
  CHECK_THROWS_AS(graph_from_json(doc), SchemaError);
  doc = graph_to_json(g);
  doc["x"]["shape"][1] = 5;
  CHECK_THROWS_AS(graph_from_json(doc), SchemaError);
}

TEST_CASE("bidirectional invariant holds on synthetic corpora") {
  SynthOptions opt;
  opt.graphs = 10;
  for (auto kind : {SynthKind::Planted, SynthKind::Homophily, SynthKind::Taxonomy}) {
    opt.kind = kind;
    auto s = generate_synthetic(opt);
    std::vector<std::vector<BodyRecord>> bodies;
    std::vector<AssemblyMeta> metas;
    for (const auto& a : s.assemblies) {
      bodies.push_back(extract_bodies(a));
      metas.push_back(a.meta);
    }
    FeatureEncoder enc(fit_state(bodies, metas, {}, s.catalog), nullptr, nullptr);
    for (std::size_t i = 0; i < s.assemblies.size(); ++i) {
      auto g = build_graph(s.assemblies[i].assembly_id, bodies[i], extract_connections(s.assemblies[i], bodies[i]),
                           metas[i], enc);
      check_reverse_partners(g);
      for (auto kind2 : {ConnectionKind::Contact, ConnectionKind::Joint, ConnectionKind::Hierarchical}) {
        auto ab = apply_edge_ablation(g, kind2);
        CHECK(ab.edge_attr.cols == 3);
        CHECK(ab.edge_attr.rows == ab.num_edges());
        check_reverse_partners(ab);
      }
      for (const char* block : {"SemanticNames", "body_physical", "occurrence_physical", "body_geometry", "global"}) {
        auto ab = apply_node_ablation(g, block);
        CHECK(ab.x.cols == ab.schema.node_width());
      }
    }
  }
}
