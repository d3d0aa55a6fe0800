#include "matgraph/ingest.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "matgraph/errors.hpp"

namespace matgraph {

namespace {

double number_or(const json& obj, const char* key, double fallback = 0.0) {
  if (!obj.is_object()) return fallback;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_number()) throw SchemaError(std::string("field '") + key + "' must be a number");
  return it->get<double>();
}

std::string string_or(const json& obj, const char* key, std::string fallback = {}) {
  if (!obj.is_object()) return fallback;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

Vec3 vec3_from(const json& obj) {
  return {number_or(obj, "x"), number_or(obj, "y"), number_or(obj, "z")};
}

json vec3_to(const Vec3& v) { return {{"x", v.x}, {"y", v.y}, {"z", v.z}}; }

const json& child(const json& obj, const char* key) {
  static const json kNull;
  if (!obj.is_object()) return kNull;
  auto it = obj.find(key);
  return it == obj.end() ? kNull : *it;
}

std::vector<EntityPair> pairs_from(const json& arr, const char* what) {
  std::vector<EntityPair> out;
  if (arr.is_null()) return out;
  if (!arr.is_array()) throw SchemaError(std::string("'") + what + "' must be a list");
  for (const auto& e : arr) out.push_back({string_or(e, "body_one"), string_or(e, "body_two")});
  return out;
}

json pairs_to(const std::vector<EntityPair>& pairs) {
  json arr = json::array();
  for (const auto& p : pairs) arr.push_back({{"body_one", p.body_one}, {"body_two", p.body_two}});
  return arr;
}

std::vector<std::string> string_list(const json& arr, const char* what) {
  std::vector<std::string> out;
  if (arr.is_null()) return out;
  if (!arr.is_array()) throw SchemaError(std::string("'") + what + "' must be a list");
  for (const auto& e : arr) {
    if (!e.is_string()) throw SchemaError(std::string("'") + what + "' entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

void flatten(const json& node, int parent, int depth, std::vector<FlatOccurrence>& out) {
  const int self = static_cast<int>(out.size());
  FlatOccurrence occ;
  occ.parent = parent;
  occ.depth = depth;
  if (parent >= 0) {
    occ.id = string_or(node, "id");
    occ.name = string_or(node, "name");
    const json& phys = child(node, "physical_properties");
    occ.area = number_or(phys, "surface_area");
    occ.volume = number_or(phys, "volume");
  }
  occ.bodies = string_list(child(node, "bodies"), "bodies");
  out.push_back(std::move(occ));
  if (parent >= 0) out[parent].children.push_back(self);
  const json& subs = child(node, "occurrences");
  if (subs.is_null()) return;
  if (!subs.is_array()) throw SchemaError("'occurrences' must be a list");
  for (const auto& s : subs) flatten(s, self, depth + 1, out);
}

json unflatten(const std::vector<FlatOccurrence>& occs, int index) {
  const auto& occ = occs[index];
  json node = json::object();
  if (index > 0) {
    node["id"] = occ.id;
    node["name"] = occ.name;
    node["physical_properties"] = {{"surface_area", occ.area}, {"volume", occ.volume}};
  }
  node["bodies"] = occ.bodies;
  json subs = json::array();
  for (int c : occ.children) subs.push_back(unflatten(occs, c));
  node["occurrences"] = std::move(subs);
  return node;
}

bool is_default_material(const std::string& id, const MaterialCatalog& catalog) {
  return id.empty() || id == catalog.default_material_id;
}

bool is_default_appearance(const std::string& id, const MaterialCatalog& catalog) {
  return id.empty() || id == catalog.default_appearance_id;
}

}  // namespace

const char* to_string(ConnectionKind kind) {
  switch (kind) {
    case ConnectionKind::Contact: return "Contact";
    case ConnectionKind::Joint: return "Joint";
    case ConnectionKind::Hierarchical: return "Hierarchical";
  }
  return "?";
}

ConnectionKind connection_kind_from_string(std::string_view name) {
  if (name == "Contact") return ConnectionKind::Contact;
  if (name == "Joint") return ConnectionKind::Joint;
  if (name == "Hierarchical") return ConnectionKind::Hierarchical;
  throw ConfigError("unknown connection kind '" + std::string(name) + "'");
}

std::array<std::string, 3> MaterialCatalog::tiers(const std::string& id) const {
  auto it = entries.find(id);
  if (it == entries.end()) return {};
  return {it->second.tier1, it->second.tier2, it->second.tier3};
}

std::int32_t LabelVocabulary::index_of(const std::string& material_id) const {
  for (std::size_t i = 0; i + 1 < classes.size(); ++i)
    if (classes[i] == material_id) return static_cast<std::int32_t>(i);
  return static_cast<std::int32_t>(other_index());
}

RawAssembly parse_assembly(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  return assembly_from_json(doc);
}

RawAssembly assembly_from_json(const json& doc) {
  if (!doc.is_object()) throw SchemaError("assembly document must be a JSON object");
  RawAssembly a;
  a.assembly_id = string_or(doc, "assembly_id");

  const json& bodies = child(doc, "bodies");
  if (!bodies.is_null() && !bodies.is_object()) throw SchemaError("'bodies' must be a map of UUID to body");
  if (bodies.is_object()) {
    for (const auto& [uuid, b] : bodies.items()) {
      RawBody body;
      body.uuid = uuid;
      body.name = string_or(b, "name");
      const json& phys = child(b, "physical_properties");
      body.area = number_or(phys, "surface_area");
      body.volume = number_or(phys, "volume");
      body.center_of_mass = vec3_from(child(phys, "center_of_mass"));
      body.material_id = string_or(b, "material_id");
      body.appearance_id = string_or(b, "appearance_id");
      const json& vis = child(b, "is_visible");
      if (!vis.is_null() && !vis.is_boolean()) throw SchemaError("body " + uuid + ": 'is_visible' must be a boolean");
      body.visible = vis.is_null() ? true : vis.get<bool>();
      if (body.area < 0 || body.volume < 0) throw SchemaError("body " + uuid + ": negative area or volume");
      a.bodies.emplace(uuid, std::move(body));
    }
  }

  flatten(child(doc, "tree"), -1, 0, a.occurrences);

  std::unordered_set<std::string> placed;
  for (const auto& occ : a.occurrences)
    for (const auto& uuid : occ.bodies) {
      if (!a.bodies.count(uuid)) throw SchemaError("tree references unknown body UUID " + uuid);
      if (!placed.insert(uuid).second) throw SchemaError("body UUID " + uuid + " appears in more than one occurrence");
    }
  // Bodies absent from the tree belong to the root component.
  for (const auto& [uuid, body] : a.bodies)
    if (!placed.count(uuid)) a.occurrences[0].bodies.push_back(uuid);

  a.joints = pairs_from(child(doc, "joints"), "joints");
  a.as_built_joints = pairs_from(child(doc, "as_built_joints"), "as_built_joints");
  a.contacts = pairs_from(child(doc, "contacts"), "contacts");
  for (const auto* list : {&a.joints, &a.as_built_joints, &a.contacts})
    for (const auto& p : *list)
      for (const auto* uuid : {&p.body_one, &p.body_two})
        if (!a.bodies.count(*uuid)) throw SchemaError("connection references unknown body UUID " + *uuid);

  a.meta = meta_from_json(child(doc, "meta"));
  return a;
}

json assembly_to_json(const RawAssembly& a) {
  json bodies = json::object();
  for (const auto& [uuid, b] : a.bodies) {
    bodies[uuid] = {
        {"name", b.name},
        {"physical_properties",
         {{"surface_area", b.area}, {"volume", b.volume}, {"center_of_mass", vec3_to(b.center_of_mass)}}},
        {"material_id", b.material_id},
        {"appearance_id", b.appearance_id},
        {"is_visible", b.visible},
    };
  }
  json doc = {
      {"assembly_id", a.assembly_id},
      {"bodies", std::move(bodies)},
      {"joints", pairs_to(a.joints)},
      {"as_built_joints", pairs_to(a.as_built_joints)},
      {"contacts", pairs_to(a.contacts)},
      {"meta", meta_to_json(a.meta)},
  };
  doc["tree"] = a.occurrences.empty() ? json::object() : unflatten(a.occurrences, 0);
  return doc;
}

AssemblyMeta meta_from_json(const json& doc) {
  AssemblyMeta m;
  m.category = string_or(doc, "category");
  m.industry = string_or(doc, "industry");
  m.products = string_list(child(doc, "products"), "products");
  const json& phys = child(doc, "physical");
  m.volume = number_or(phys, "volume");
  m.center_of_mass = vec3_from(child(phys, "center_of_mass"));
  const json& geo = child(doc, "geometric");
  for (std::size_t i = 0; i < kGeometricCounts.size(); ++i) m.geometric[i] = number_or(geo, kGeometricCounts[i]);
  return m;
}

json meta_to_json(const AssemblyMeta& m) {
  json geo = json::object();
  for (std::size_t i = 0; i < kGeometricCounts.size(); ++i) geo[kGeometricCounts[i]] = m.geometric[i];
  return {
      {"category", m.category},
      {"industry", m.industry},
      {"products", m.products},
      {"physical", {{"volume", m.volume}, {"center_of_mass", vec3_to(m.center_of_mass)}}},
      {"geometric", std::move(geo)},
  };
}

json body_record_to_json(const BodyRecord& b) {
  return {
      {"uuid", b.uuid},
      {"body_name", b.body_name},
      {"occurrence_name", b.occurrence_name},
      {"area", b.area},
      {"volume", b.volume},
      {"center_of_mass", vec3_to(b.center_of_mass)},
      {"occurrence_area", b.occurrence_area},
      {"occurrence_volume", b.occurrence_volume},
      {"physical_material_id", b.physical_material_id},
      {"appearance_id", b.appearance_id},
      {"visible", b.visible},
      {"depth", b.depth},
      {"occurrence", b.occurrence},
  };
}

BodyRecord body_record_from_json(const json& d) {
  BodyRecord b;
  b.uuid = d.at("uuid").get<std::string>();
  b.body_name = d.at("body_name").get<std::string>();
  b.occurrence_name = d.at("occurrence_name").get<std::string>();
  b.area = d.at("area").get<double>();
  b.volume = d.at("volume").get<double>();
  b.center_of_mass = vec3_from(d.at("center_of_mass"));
  b.occurrence_area = d.at("occurrence_area").get<double>();
  b.occurrence_volume = d.at("occurrence_volume").get<double>();
  b.physical_material_id = d.at("physical_material_id").get<std::string>();
  b.appearance_id = d.at("appearance_id").get<std::string>();
  b.visible = d.at("visible").get<bool>();
  b.depth = d.at("depth").get<int>();
  b.occurrence = d.at("occurrence").get<int>();
  return b;
}

MaterialCatalog parse_catalog(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  if (!doc.is_object()) throw SchemaError("catalog must be a JSON object");
  MaterialCatalog c;
  c.default_material_id = string_or(doc, "default_material_id");
  c.default_appearance_id = string_or(doc, "default_appearance_id");
  // Materials sit either under "materials" or directly beside the two default keys.
  const json& nested = child(doc, "materials");
  const json& mats = nested.is_object() ? nested : doc;
  for (const auto& [id, m] : mats.items()) {
    if (&mats == &doc && (id == "default_material_id" || id == "default_appearance_id")) continue;
    if (!m.is_object()) throw SchemaError("catalog entry " + id + " must be an object");
    MaterialInfo info{string_or(m, "name"), string_or(m, "tier1"), string_or(m, "tier2"), string_or(m, "tier3")};
    if (info.tier1.empty()) throw SchemaError("catalog material " + id + " has no tier1");
    if (!info.tier3.empty() && info.tier2.empty()) throw SchemaError("catalog material " + id + " has tier3 without tier2");
    c.entries.emplace(id, std::move(info));
  }
  return c;
}

json catalog_to_json(const MaterialCatalog& c) {
  json doc = json::object();
  for (const auto& [id, m] : c.entries)
    doc[id] = {{"name", m.display_name}, {"tier1", m.tier1}, {"tier2", m.tier2}, {"tier3", m.tier3}};
  doc["default_material_id"] = c.default_material_id;
  doc["default_appearance_id"] = c.default_appearance_id;
  return doc;
}

SplitManifest parse_split_manifest(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  SplitManifest m;
  if (!doc.contains("seed") || !doc["seed"].is_number_integer()) throw ManifestError("split manifest requires an integer 'seed'");
  m.seed = doc["seed"].get<std::uint64_t>();
  m.test_ids = string_list(child(doc, "test_ids"), "test_ids");
  return m;
}

json split_manifest_to_json(const SplitManifest& m) { return {{"seed", m.seed}, {"test_ids", m.test_ids}}; }

json label_vocabulary_to_json(const LabelVocabulary& v) { return {{"classes", v.classes}, {"counts", v.counts}}; }

LabelVocabulary label_vocabulary_from_json(const json& d) {
  LabelVocabulary v;
  v.classes = d.at("classes").get<std::vector<std::string>>();
  v.counts = d.at("counts").get<std::vector<std::int64_t>>();
  if (v.classes.empty() || v.classes.back() != kOtherLabel || v.counts.size() != v.classes.size())
    throw SchemaError("label vocabulary must end with OTHER and carry one count per class");
  return v;
}

std::vector<BodyRecord> extract_bodies(const RawAssembly& a) {
  std::vector<BodyRecord> out;
  for (std::size_t oi = 0; oi < a.occurrences.size(); ++oi) {
    const auto& occ = a.occurrences[oi];
    for (const auto& uuid : occ.bodies) {
      const RawBody& raw = a.bodies.at(uuid);
      if (!raw.visible) continue;
      BodyRecord r;
      r.uuid = raw.uuid;
      r.body_name = raw.name;
      r.area = raw.area;
      r.volume = raw.volume;
      r.center_of_mass = raw.center_of_mass;
      r.physical_material_id = raw.material_id;
      r.appearance_id = raw.appearance_id;
      r.visible = true;
      r.occurrence = static_cast<int>(oi);
      r.depth = occ.depth;
      if (oi > 0) {
        r.occurrence_name = occ.name;
        r.occurrence_area = occ.area;
        r.occurrence_volume = occ.volume;
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<ConnectionRecord> extract_connections(const RawAssembly& a, const std::vector<BodyRecord>& bodies) {
  std::unordered_set<std::string> visible;
  for (const auto& b : bodies) visible.insert(b.uuid);

  std::vector<ConnectionRecord> out;
  auto take = [&](const std::vector<EntityPair>& pairs, ConnectionKind kind) {
    for (const auto& p : pairs) {
      if (p.body_one == p.body_two) continue;
      if (!visible.count(p.body_one) || !visible.count(p.body_two)) {
        const bool known = a.bodies.count(p.body_one) && a.bodies.count(p.body_two);
        if (known) {
          spdlog::debug("{}: dropping {} touching an invisible body", a.assembly_id, to_string(kind));
        } else {
          spdlog::warn("{}: dropping {} with endpoint outside the body list", a.assembly_id, to_string(kind));
        }
        continue;
      }
      out.push_back({p.body_one, p.body_two, kind});
    }
  };
  take(a.contacts, ConnectionKind::Contact);
  take(a.joints, ConnectionKind::Joint);
  take(a.as_built_joints, ConnectionKind::Joint);

  std::vector<std::vector<const BodyRecord*>> members(a.occurrences.size());
  for (const auto& b : bodies)
    if (b.occurrence > 0) members.at(b.occurrence).push_back(&b);
  for (const auto& group : members)
    for (std::size_t i = 0; i < group.size(); ++i)
      for (std::size_t j = i + 1; j < group.size(); ++j)
        out.push_back({group[i]->uuid, group[j]->uuid, ConnectionKind::Hierarchical});
  return out;
}

bool is_default_only(const std::vector<BodyRecord>& bodies, const MaterialCatalog& catalog) {
  return std::all_of(bodies.begin(), bodies.end(), [&](const BodyRecord& b) {
    return is_default_material(b.physical_material_id, catalog) && is_default_appearance(b.appearance_id, catalog);
  });
}

std::vector<RawAssembly> filter_default_assemblies(std::vector<RawAssembly> assemblies, const MaterialCatalog& catalog) {
  std::vector<RawAssembly> kept;
  for (auto& a : assemblies)
    if (!is_default_only(extract_bodies(a), catalog)) kept.push_back(std::move(a));
  return kept;
}

ResolvedMaterial resolve_material(const BodyRecord& b, const MaterialCatalog& catalog) {
  ResolvedMaterial out;
  if (!is_default_material(b.physical_material_id, catalog)) {
    out.material_id = b.physical_material_id;
  } else if (!is_default_appearance(b.appearance_id, catalog)) {
    out.material_id = b.appearance_id;
  } else {
    out.material_id = catalog.default_material_id;
    out.is_default = true;
  }
  if (!catalog.contains(out.material_id) && out.material_id != catalog.default_material_id) {
    spdlog::warn("body {}: material '{}' not in catalog, mapped to {}", b.uuid, out.material_id, kOtherLabel);
    out.material_id = kOtherLabel;
  }
  return out;
}

LabelVocabulary group_materials(const std::map<std::string, std::int64_t>& counts) {
  std::vector<std::pair<std::string, std::int64_t>> ranked;
  std::int64_t other = 0;
  for (const auto& [id, n] : counts) {
    if (id == kOtherLabel) {
      other += n;
    } else {
      ranked.emplace_back(id, n);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  LabelVocabulary v;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (i < kTopMaterials) {
      v.classes.push_back(ranked[i].first);
      v.counts.push_back(ranked[i].second);
    } else {
      other += ranked[i].second;
    }
  }
  v.classes.push_back(kOtherLabel);
  v.counts.push_back(other);
  return v;
}

DatasetSplit split_dataset(const std::vector<std::string>& graph_ids, const SplitManifest& manifest) {
  const std::set<std::string> all(graph_ids.begin(), graph_ids.end());
  const std::set<std::string> test(manifest.test_ids.begin(), manifest.test_ids.end());
  for (const auto& id : manifest.test_ids)
    if (!all.count(id)) throw ManifestError("test id '" + id + "' is not in the corpus");

  DatasetSplit s;
  s.test = manifest.test_ids;
  std::vector<std::string> rest;
  for (const auto& id : all)
    if (!test.count(id)) rest.push_back(id);
  std::mt19937_64 rng(manifest.seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  const std::size_t n_train = (7 * rest.size() + 5) / 10;  // round half up of 0.7 n
  s.train.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train), rest.end());
  return s;
}

}  // namespace matgraph
