#include <doctest.h>

#include <map>
#include <regex>
#include <set>

#include "matgraph/corpus.hpp"
#include "matgraph/errors.hpp"
#include "matgraph/synth.hpp"
#include "support.hpp"

using namespace matgraph;
namespace fs = std::filesystem;

namespace {

SynthCorpus make(SynthKind kind, int graphs, std::uint64_t seed) {
  SynthOptions o;
  o.kind = kind;
  o.graphs = graphs;
  o.seed = seed;
  return generate_synthetic(o);
}

/// Undirected neighbours: contacts, joints and bodies sharing an occurrence.
std::map<std::string, std::set<std::string>> neighbours(const RawAssembly& a) {
  std::map<std::string, std::set<std::string>> nb;
  auto link = [&](const std::string& u, const std::string& v) {
    nb[u].insert(v);
    nb[v].insert(u);
  };
  for (const auto& p : a.contacts) link(p.body_one, p.body_two);
  for (const auto& p : a.joints) link(p.body_one, p.body_two);
  for (const auto& occ : a.occurrences)
    for (std::size_t i = 0; i < occ.bodies.size(); ++i)
      for (std::size_t j = i + 1; j < occ.bodies.size(); ++j) link(occ.bodies[i], occ.bodies[j]);
  return nb;
}

const std::vector<std::string> kKeywordOrder{"bolt", "gear", "housing", "bracket", "shaft", "washer", "spring", "cover"};

std::string keyword_of(const std::string& name) { return name.substr(0, name.find(' ')); }

}  // namespace

TEST_CASE("generation is a pure function of the options") {
  for (auto kind : {SynthKind::Planted, SynthKind::Homophily, SynthKind::Taxonomy}) {
    CAPTURE(to_string(kind));
    const auto a = make(kind, 12, 5);
    const auto b = make(kind, 12, 5);
    CHECK(a.assemblies == b.assemblies);
    CHECK(a.manifest.test_ids == b.manifest.test_ids);
    CHECK(a.semantic.serialize() == b.semantic.serialize());
    CHECK(make(kind, 12, 6).assemblies != a.assemblies);
    CHECK(synth_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(synth_kind_from_string("random"), ConfigError);
}

TEST_CASE("synthetic catalog has six tier-3 groups of three") {
  const auto c = synthetic_catalog();
  CHECK(c.contains(c.default_material_id));
  std::map<std::string, int> groups;
  for (const auto& [id, info] : c.entries)
    if (id != c.default_material_id) ++groups[info.tier3];
  CHECK(groups.size() == 6);
  for (const auto& [name, count] : groups) CHECK(count == 3);
}

TEST_CASE("split manifest holds the requested test fraction") {
  const auto s = make(SynthKind::Planted, 50, 1);
  CHECK(s.assemblies.size() == 50);
  CHECK(s.manifest.test_ids.size() == 10);
  CHECK(std::is_sorted(s.manifest.test_ids.begin(), s.manifest.test_ids.end()));
  std::set<std::string> ids;
  for (const auto& a : s.assemblies) ids.insert(a.assembly_id);
  for (const auto& t : s.manifest.test_ids) CHECK(ids.count(t));

  SynthOptions bad;
  bad.graphs = 0;
  CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
  bad.graphs = 5;
  bad.test_fraction = 1.0;
  CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
}

TEST_CASE("every synthetic assembly survives ingest and the discard rule") {
  for (auto kind : {SynthKind::Planted, SynthKind::Homophily, SynthKind::Taxonomy}) {
    CAPTURE(to_string(kind));
    const auto s = make(kind, 30, 2);
    const auto r = ingest_assemblies(s.assemblies, s.catalog);
    CHECK(r.dropped.empty());
    BuildOptions o;
    o.manifest = s.manifest;
    o.semantic = std::make_shared<EmbeddingTable>(s.semantic);
    const auto c = build_corpus(r.kept, s.catalog, o);
    CHECK(c.dropped.empty());
    CHECK(c.graphs.size() == 30);
  }
}

TEST_CASE("planted labels follow the keyword or the named-neighbour majority") {
  const auto s = make(SynthKind::Planted, 100, 9);
  const std::regex default_name(kDefaultNamePattern);
  std::map<std::string, std::set<std::string>> keyword_materials;
  std::size_t bodies = 0, defaults = 0;
  for (const auto& a : s.assemblies)
    for (const auto& [uuid, b] : a.bodies) {
      ++bodies;
      if (std::regex_match(b.name, default_name))
        ++defaults;
      else
        keyword_materials[keyword_of(b.name)].insert(b.material_id);
    }
  // One material per keyword, and the keywords are the known vocabulary.
  CHECK(keyword_materials.size() == kKeywordOrder.size());
  std::map<std::string, std::string> material_of;
  for (const auto& [k, m] : keyword_materials) {
    CHECK(m.size() == 1);
    material_of[k] = *m.begin();
  }
  const double rate = double(defaults) / double(bodies);
  CHECK(rate > 0.05);
  CHECK(rate < 0.15);

  for (const auto& a : s.assemblies) {
    const auto nb = neighbours(a);
    for (const auto& [uuid, b] : a.bodies) {
      if (!std::regex_match(b.name, default_name)) continue;
      // Vote in keyword order so ties go to the earlier keyword.
      std::vector<int> votes(kKeywordOrder.size(), 0);
      for (const auto& u : nb.at(uuid)) {
        const auto& nbody = a.bodies.at(u);
        if (std::regex_match(nbody.name, default_name)) continue;
        const auto it = std::find(kKeywordOrder.begin(), kKeywordOrder.end(), keyword_of(nbody.name));
        ++votes[it - kKeywordOrder.begin()];
      }
      const auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();
      REQUIRE(votes[best] > 0);
      CHECK(b.material_id == material_of[kKeywordOrder[best]]);
    }
  }
}

TEST_CASE("homophily assemblies share one material per occurrence and carry no names") {
  const auto s = make(SynthKind::Homophily, 40, 3);
  const std::regex default_name(kDefaultNamePattern);
  for (const auto& a : s.assemblies) {
    for (const auto& occ : a.occurrences) {
      CHECK(std::regex_match(occ.name.empty() ? std::string("Component") : occ.name, default_name));
      std::set<std::string> mats;
      for (const auto& uuid : occ.bodies) mats.insert(a.bodies.at(uuid).material_id);
      CHECK(mats.size() <= 1);
    }
    for (const auto& [uuid, b] : a.bodies) CHECK(std::regex_match(b.name, default_name));
  }
}

TEST_CASE("taxonomy grades mostly follow the volume tercile") {
  const auto s = make(SynthKind::Taxonomy, 200, 4);
  const auto catalog = synthetic_catalog();
  // Materials of each tier-3 group in id order: grade = position in the group.
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& [id, info] : catalog.entries)
    if (id != catalog.default_material_id) groups[info.tier3].push_back(id);
  std::size_t n = 0, follows = 0;
  double lo = 1e9, hi = 0;
  for (const auto& a : s.assemblies)
    for (const auto& [uuid, b] : a.bodies) {
      lo = std::min(lo, b.volume);
      hi = std::max(hi, b.volume);
    }
  for (const auto& a : s.assemblies)
    for (const auto& [uuid, b] : a.bodies) {
      const auto& members = groups.at(catalog.entries.at(b.material_id).tier3);
      const auto grade = std::find(members.begin(), members.end(), b.material_id) - members.begin();
      const int tercile = std::min(2, int(3 * (b.volume - 1e-6) / (1e-4 - 1e-6)));
      ++n;
      follows += grade == tercile;
    }
  CHECK(lo >= 1e-6);
  CHECK(hi <= 1e-4);
  // 0.8 + 0.2 / 3 in expectation.
  const double rate = double(follows) / double(n);
  CHECK(rate > 0.83);
  CHECK(rate < 0.90);
}

TEST_CASE("written corpora parse back to the same inputs") {
  const auto s = make(SynthKind::Planted, 6, 8);
  testing::TempDir dir("synth");
  write_synthetic(dir.path(), s);
  const auto loaded = load_assembly_directory(dir / "assemblies", 1);
  REQUIRE(loaded.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(loaded[i] == s.assemblies[i]);
  const auto catalog = parse_catalog(read_text_file(dir / "catalog.json"));
  CHECK(catalog.entries.size() == s.catalog.entries.size());
  CHECK(catalog.default_material_id == s.catalog.default_material_id);
  CHECK(parse_split_manifest(read_text_file(dir / "split.json")).test_ids == s.manifest.test_ids);
  CHECK(EmbeddingTable::load(dir / "semantic.tsv").serialize() == s.semantic.serialize());
}
