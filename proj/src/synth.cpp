#include "matgraph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "matgraph/errors.hpp"
#include "matgraph/util.hpp"

namespace matgraph {

namespace {

struct MaterialSpec {
  const char* id;
  const char* name;
  const char* tier1;
  const char* tier2;
  const char* tier3;
};

// Six tier-3 groups of three; the first of each group is the common choice.
constexpr MaterialSpec kMaterials[] = {
    {"MAT-01", "Mild Steel", "Metal", "Ferrous", "Carbon Steel"},
    {"MAT-02", "Medium Carbon Steel", "Metal", "Ferrous", "Carbon Steel"},
    {"MAT-03", "High Carbon Steel", "Metal", "Ferrous", "Carbon Steel"},
    {"MAT-04", "Stainless Steel 304", "Metal", "Ferrous", "Stainless Steel"},
    {"MAT-05", "Stainless Steel 316", "Metal", "Ferrous", "Stainless Steel"},
    {"MAT-06", "Stainless Steel 430", "Metal", "Ferrous", "Stainless Steel"},
    {"MAT-07", "Aluminum 6061", "Metal", "Non-Ferrous", "Aluminum Alloy"},
    {"MAT-08", "Aluminum 7075", "Metal", "Non-Ferrous", "Aluminum Alloy"},
    {"MAT-09", "Aluminum 5052", "Metal", "Non-Ferrous", "Aluminum Alloy"},
    {"MAT-10", "Brass", "Metal", "Non-Ferrous", "Copper Alloy"},
    {"MAT-11", "Bronze", "Metal", "Non-Ferrous", "Copper Alloy"},
    {"MAT-12", "Copper", "Metal", "Non-Ferrous", "Copper Alloy"},
    {"MAT-13", "ABS Plastic", "Polymer", "Thermoplastic", "Commodity Plastic"},
    {"MAT-14", "Polypropylene", "Polymer", "Thermoplastic", "Commodity Plastic"},
    {"MAT-15", "Polyethylene", "Polymer", "Thermoplastic", "Commodity Plastic"},
    {"MAT-16", "Nylon", "Polymer", "Thermoplastic", "Engineering Plastic"},
    {"MAT-17", "Polycarbonate", "Polymer", "Thermoplastic", "Engineering Plastic"},
    {"MAT-18", "Acetal", "Polymer", "Thermoplastic", "Engineering Plastic"},
};
constexpr const char* kDefaultMaterial = "MAT-DEFAULT";
constexpr const char* kDefaultAppearance = "APP-DEFAULT";

// Planted generator: one keyword per material, plus neutral descriptors.
constexpr const char* kKeywords[] = {"bolt", "gear", "housing", "bracket", "shaft", "washer", "spring", "cover"};
constexpr int kPlantedMaterials[] = {0, 6, 12, 9, 3, 15, 1, 16};  // indices into kMaterials
constexpr double kPlantedWeights[] = {0.30, 0.20, 0.15, 0.10, 0.10, 0.05, 0.05, 0.05};
constexpr const char* kDescriptors[] = {"left", "right", "upper", "lower", "main", "small", "large", "inner", "outer", "front"};

constexpr int kHomophilyMaterials[] = {0, 3, 6, 9, 12, 15};
// Taxonomy generator: the grade within a group follows the body's volume
// tercile with this probability, otherwise it is uniform.
constexpr double kGradeFollowsSize = 0.8;

constexpr double kMinVolume = 1e-6;
constexpr double kMaxVolume = 1e-4;

constexpr const char* kCategories[] = {"Machinery", "Automotive", "Consumer", "Robotics"};
constexpr const char* kIndustries[] = {"Manufacturing", "Transport", "Electronics", "Energy", "Medical"};
constexpr const char* kProducts[] = {"Fusion", "Inventor", "SolidWorks", "Onshape", "Creo", "NX"};

std::string padded(int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*d", width, value);
  return buf;
}

template <typename It>
auto pick(std::mt19937_64& rng, It begin, It end) {
  std::uniform_int_distribution<std::ptrdiff_t> d(0, std::distance(begin, end) - 1);
  return *(begin + d(rng));
}

int draw(std::mt19937_64& rng, const double* weights, std::size_t n) {
  std::discrete_distribution<int> d(weights, weights + n);
  return d(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

/// Skeleton shared by the generators: nodes split into occurrence groups,
/// contacts along a chain inside each group and a few between groups.
struct Skeleton {
  std::vector<int> group;                    // group index per node
  std::vector<std::pair<int, int>> contacts;
  std::vector<std::pair<int, int>> joints;
  int groups = 0;
};

Skeleton make_skeleton(std::mt19937_64& rng, int n, int min_group, int max_group) {
  Skeleton s;
  s.group.resize(n);
  std::vector<std::vector<int>> members;
  for (int i = 0; i < n;) {
    int size = std::min(n - i, uniform_int(rng, min_group, max_group));
    if (n - i - size == 1) ++size;  // no singleton tail group
    members.emplace_back();
    for (int j = 0; j < size; ++j, ++i) {
      s.group[i] = s.groups;
      members.back().push_back(i);
    }
    ++s.groups;
  }
  for (const auto& m : members)
    for (std::size_t j = 1; j < m.size(); ++j) s.contacts.emplace_back(m[j - 1], m[j]);
  for (std::size_t g = 1; g < members.size(); ++g) {
    const int a = pick(rng, members[g].begin(), members[g].end());
    const int b = pick(rng, members[g - 1].begin(), members[g - 1].end());
    s.joints.emplace_back(a, b);
  }
  return s;
}

RawAssembly assemble(const std::string& id, std::mt19937_64& rng, const Skeleton& s,
                     const std::vector<std::string>& names, const std::vector<std::string>& group_names,
                     const std::vector<std::string>& materials, const std::vector<double>& volumes = {}) {
  RawAssembly a;
  a.assembly_id = id;
  const int n = static_cast<int>(names.size());
  std::vector<std::string> uuids;
  for (int i = 0; i < n; ++i) uuids.push_back(id + "-b" + padded(i, 3));
  a.occurrences.push_back({});  // root
  for (int g = 0; g < s.groups; ++g) {
    FlatOccurrence occ;
    occ.id = id + "-o" + padded(g, 2);
    occ.name = group_names[g];
    occ.parent = 0;
    occ.depth = 1;
    occ.area = uniform(rng, 0.01, 1.0);
    occ.volume = uniform(rng, 1e-5, 1e-3);
    a.occurrences[0].children.push_back(static_cast<int>(a.occurrences.size()));
    a.occurrences.push_back(std::move(occ));
  }
  for (int i = 0; i < n; ++i) {
    RawBody b;
    b.uuid = uuids[i];
    b.name = names[i];
    b.area = uniform(rng, 0.001, 0.2);
    b.volume = volumes.empty() ? uniform(rng, kMinVolume, kMaxVolume) : volumes[i];
    b.center_of_mass = {uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)};
    b.material_id = materials[i];
    b.appearance_id = kDefaultAppearance;
    a.bodies.emplace(b.uuid, b);
    a.occurrences[1 + s.group[i]].bodies.push_back(b.uuid);
  }
  for (auto [u, v] : s.contacts) a.contacts.push_back({uuids[u], uuids[v]});
  for (auto [u, v] : s.joints) a.joints.push_back({uuids[u], uuids[v]});

  a.meta.category = pick(rng, std::begin(kCategories), std::end(kCategories));
  a.meta.industry = pick(rng, std::begin(kIndustries), std::end(kIndustries));
  std::set<std::string> products;
  for (int k = uniform_int(rng, 1, 2); k > 0; --k) products.insert(pick(rng, std::begin(kProducts), std::end(kProducts)));
  a.meta.products.assign(products.begin(), products.end());
  a.meta.volume = uniform(rng, 1e-4, 1e-2);
  a.meta.center_of_mass = {uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)};
  for (auto& g : a.meta.geometric) g = std::round(uniform(rng, 10.0, 500.0));
  return a;
}

std::vector<std::string> default_group_names(int groups) {
  std::vector<std::string> out;
  for (int g = 0; g < groups; ++g) out.push_back("Component" + std::to_string(g + 1));
  return out;
}

std::vector<std::vector<int>> adjacency(const Skeleton& s, int n) {
  std::vector<std::set<int>> nb(n);
  auto link = [&](int u, int v) {
    nb[u].insert(v);
    nb[v].insert(u);
  };
  for (auto [u, v] : s.contacts) link(u, v);
  for (auto [u, v] : s.joints) link(u, v);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (s.group[u] == s.group[v]) link(u, v);
  std::vector<std::vector<int>> out(n);
  for (int u = 0; u < n; ++u) out[u].assign(nb[u].begin(), nb[u].end());
  return out;
}

RawAssembly planted(const std::string& id, std::mt19937_64& rng, double default_rate) {
  const int n = uniform_int(rng, 8, 20);
  Skeleton s = make_skeleton(rng, n, 2, 5);
  std::vector<int> label(n, -1);
  std::vector<bool> named(n, true);
  for (int i = 0; i < n; ++i) {
    named[i] = uniform(rng, 0.0, 1.0) >= default_rate;
    label[i] = draw(rng, kPlantedWeights, std::size(kPlantedWeights));
  }
  if (std::none_of(named.begin(), named.end(), [](bool b) { return b; })) named[0] = true;
  auto nb = adjacency(s, n);
  std::vector<std::string> names(n), materials(n);
  for (int i = 0; i < n; ++i) {
    if (named[i]) continue;
    std::map<int, int> votes;
    for (int u : nb[i])
      if (named[u]) ++votes[label[u]];
    if (votes.empty()) {
      int target = 0;
      while (!named[target]) ++target;
      s.contacts.emplace_back(i, target);
      nb = adjacency(s, n);
      votes[label[target]] = 1;
    }
    // Majority of named neighbours; ties resolve to the smaller label.
    int best = -1, best_votes = 0;
    for (auto [l, c] : votes)
      if (c > best_votes) best = l, best_votes = c;
    label[i] = best;
  }
  for (int i = 0; i < n; ++i) {
    names[i] = named[i] ? std::string(kKeywords[label[i]]) + " " + pick(rng, std::begin(kDescriptors), std::end(kDescriptors))
                        : "Body" + std::to_string(i + 1);
    materials[i] = kMaterials[kPlantedMaterials[label[i]]].id;
  }
  return assemble(id, rng, s, names, default_group_names(s.groups), materials);
}

RawAssembly homophily(const std::string& id, std::mt19937_64& rng) {
  const int n = uniform_int(rng, 12, 24);
  Skeleton s = make_skeleton(rng, n, 3, 6);
  std::vector<int> group_label(s.groups);
  for (auto& l : group_label) l = uniform_int(rng, 0, int(std::size(kHomophilyMaterials)) - 1);
  std::vector<std::string> names(n), materials(n);
  for (int i = 0; i < n; ++i) {
    names[i] = "Body" + std::to_string(i + 1);
    materials[i] = kMaterials[kHomophilyMaterials[group_label[s.group[i]]]].id;
  }
  return assemble(id, rng, s, names, default_group_names(s.groups), materials);
}

RawAssembly taxonomy(const std::string& id, std::mt19937_64& rng) {
  const int n = uniform_int(rng, 8, 16);
  Skeleton s = make_skeleton(rng, n, 2, 5);
  std::vector<std::string> names(n), materials(n);
  std::vector<double> volumes(n);
  for (int i = 0; i < n; ++i) {
    const int group = uniform_int(rng, 0, 5);
    volumes[i] = uniform(rng, kMinVolume, kMaxVolume);
    const int tercile = std::min(2, static_cast<int>(3.0 * (volumes[i] - kMinVolume) / (kMaxVolume - kMinVolume)));
    const int member = uniform(rng, 0.0, 1.0) < kGradeFollowsSize ? tercile : uniform_int(rng, 0, 2);
    names[i] = "Body" + std::to_string(i + 1);
    materials[i] = kMaterials[3 * group + member].id;
  }
  return assemble(id, rng, s, names, default_group_names(s.groups), materials, volumes);
}

}  // namespace

const char* to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::Planted: return "planted";
    case SynthKind::Homophily: return "homophily";
    case SynthKind::Taxonomy: return "taxonomy";
  }
  return "?";
}

SynthKind synth_kind_from_string(std::string_view name) {
  if (name == "planted") return SynthKind::Planted;
  if (name == "homophily") return SynthKind::Homophily;
  if (name == "taxonomy") return SynthKind::Taxonomy;
  throw ConfigError("unknown synthetic corpus kind '" + std::string(name) + "'");
}

MaterialCatalog synthetic_catalog() {
  MaterialCatalog c;
  for (const auto& m : kMaterials) c.entries[m.id] = {m.name, m.tier1, m.tier2, m.tier3};
  c.entries[kDefaultMaterial] = {"Steel", "Metal", "Ferrous", "Carbon Steel"};
  c.default_material_id = kDefaultMaterial;
  c.default_appearance_id = kDefaultAppearance;
  return c;
}

SynthCorpus generate_synthetic(const SynthOptions& opt) {
  if (opt.graphs < 1) throw ConfigError("graph count must be positive");
  if (!(opt.test_fraction >= 0.0 && opt.test_fraction < 1.0)) throw ConfigError("test fraction must be in [0, 1)");
  SynthCorpus out;
  out.catalog = synthetic_catalog();
  std::mt19937_64 rng(mix_seed(opt.seed, fnv1a64(to_string(opt.kind))));

  // Keyword and descriptor vectors; the table also seeds imputation statistics.
  std::normal_distribution<double> unit(0.0, 1.0);
  auto add_token = [&](const std::string& token) {
    std::vector<float> v(kSemanticDim);
    for (auto& x : v) x = static_cast<float>(unit(rng));
    out.semantic.insert(token, std::move(v));
  };
  for (const char* k : kKeywords) add_token(k);
  for (const char* d : kDescriptors) add_token(d);

  const std::string prefix = to_string(opt.kind);
  std::vector<std::string> ids;
  for (int g = 0; g < opt.graphs; ++g) {
    const std::string id = prefix + "-" + padded(g, 4);
    std::mt19937_64 grng(mix_seed(rng(), g));
    switch (opt.kind) {
      case SynthKind::Planted: out.assemblies.push_back(planted(id, grng, opt.default_name_rate)); break;
      case SynthKind::Homophily: out.assemblies.push_back(homophily(id, grng)); break;
      case SynthKind::Taxonomy: out.assemblies.push_back(taxonomy(id, grng)); break;
    }
    ids.push_back(id);
  }
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::size_t n_test = static_cast<std::size_t>(std::llround(opt.test_fraction * double(ids.size())));
  out.manifest.seed = opt.seed;
  out.manifest.test_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::sort(out.manifest.test_ids.begin(), out.manifest.test_ids.end());
  return out;
}

void write_synthetic(const std::filesystem::path& dir, const SynthCorpus& c) {
  for (const auto& a : c.assemblies)
    write_text_file(dir / "assemblies" / (a.assembly_id + ".json"), assembly_to_json(a).dump(1) + "\n");
  write_text_file(dir / "catalog.json", catalog_to_json(c.catalog).dump(2) + "\n");
  write_text_file(dir / "semantic.tsv", c.semantic.serialize());
  write_text_file(dir / "split.json", split_manifest_to_json(c.manifest).dump(2) + "\n");
}

}  // namespace matgraph
