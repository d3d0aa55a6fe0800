#pragma once

// Assembly JSON ingestion: parsing, body/connection extraction, the
// dataset hygiene transforms, label grouping and the train/val/test split.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "matgraph/json.hpp"

namespace matgraph {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  bool operator==(const Vec3&) const = default;
};

struct RawBody {
  std::string uuid;
  std::string name;
  double area = 0.0;
  double volume = 0.0;
  Vec3 center_of_mass;
  std::string material_id;
  std::string appearance_id;
  bool visible = true;
  bool operator==(const RawBody&) const = default;
};

/// One node of the occurrence tree after flattening. Index 0 is the root,
/// which is not an occurrence itself; bodies listed there sit at depth 0.
struct FlatOccurrence {
  std::string id;
  std::string name;
  double area = 0.0;
  double volume = 0.0;
  int parent = -1;
  int depth = 0;
  std::vector<std::string> bodies;
  std::vector<int> children;
  bool operator==(const FlatOccurrence&) const = default;
};

struct EntityPair {
  std::string body_one;
  std::string body_two;
  bool operator==(const EntityPair&) const = default;
};

inline constexpr std::array<const char*, 5> kGeometricCounts = {"edges", "faces", "loops", "shells", "vertices"};

struct AssemblyMeta {
  std::string category;
  std::string industry;
  std::vector<std::string> products;
  double volume = 0.0;
  Vec3 center_of_mass;
  std::array<double, 5> geometric{};  // in kGeometricCounts order
  bool operator==(const AssemblyMeta&) const = default;
};

struct RawAssembly {
  std::string assembly_id;
  std::vector<FlatOccurrence> occurrences;  // [0] is the root
  std::map<std::string, RawBody> bodies;
  std::vector<EntityPair> joints;
  std::vector<EntityPair> as_built_joints;
  std::vector<EntityPair> contacts;
  AssemblyMeta meta;
  bool operator==(const RawAssembly&) const = default;
};

struct BodyRecord {
  std::string uuid;
  std::string body_name;
  std::string occurrence_name;
  double area = 0.0;
  double volume = 0.0;
  Vec3 center_of_mass;
  double occurrence_area = 0.0;
  double occurrence_volume = 0.0;
  std::string physical_material_id;
  std::string appearance_id;
  bool visible = true;
  int depth = 0;
  int occurrence = 0;  // index into RawAssembly::occurrences
  bool operator==(const BodyRecord&) const = default;
};

enum class ConnectionKind : std::uint8_t { Contact = 0, Joint = 1, Hierarchical = 2 };
inline constexpr int kConnectionKinds = 3;
const char* to_string(ConnectionKind kind);
ConnectionKind connection_kind_from_string(std::string_view name);

struct ConnectionRecord {
  std::string src;
  std::string dst;
  ConnectionKind kind = ConnectionKind::Contact;
  bool operator==(const ConnectionRecord&) const = default;
};

struct MaterialInfo {
  std::string display_name;
  std::string tier1;
  std::string tier2;
  std::string tier3;
};

struct MaterialCatalog {
  std::map<std::string, MaterialInfo> entries;
  std::string default_material_id;
  std::string default_appearance_id;

  bool contains(const std::string& id) const { return entries.count(id) != 0; }
  /// Tier names up to `depth` (1..3); empty strings for missing tiers.
  std::array<std::string, 3> tiers(const std::string& id) const;
};

inline constexpr const char* kOtherLabel = "OTHER";
inline constexpr std::size_t kTopMaterials = 20;

struct LabelVocabulary {
  std::vector<std::string> classes;  // top materials then OTHER (always last)
  std::vector<std::int64_t> counts;  // training frequency per class

  std::size_t size() const { return classes.size(); }
  std::size_t other_index() const { return classes.size() - 1; }
  /// Class index for a material id; ids outside the top set map to OTHER.
  std::int32_t index_of(const std::string& material_id) const;
};

struct SplitManifest {
  std::uint64_t seed = 0;
  std::vector<std::string> test_ids;
};

struct DatasetSplit {
  std::vector<std::string> train, val, test;
};

struct ResolvedMaterial {
  std::string material_id;
  bool is_default = false;
};

// ---- parsing ----------------------------------------------------------

RawAssembly parse_assembly(std::string_view document);
RawAssembly assembly_from_json(const nlohmann::json& doc);
nlohmann::json assembly_to_json(const RawAssembly& assembly);

MaterialCatalog parse_catalog(std::string_view document);
nlohmann::json catalog_to_json(const MaterialCatalog& catalog);

SplitManifest parse_split_manifest(std::string_view document);
nlohmann::json split_manifest_to_json(const SplitManifest& manifest);

nlohmann::json label_vocabulary_to_json(const LabelVocabulary& vocab);
LabelVocabulary label_vocabulary_from_json(const nlohmann::json& doc);

nlohmann::json meta_to_json(const AssemblyMeta& meta);
AssemblyMeta meta_from_json(const nlohmann::json& doc);
nlohmann::json body_record_to_json(const BodyRecord& body);
BodyRecord body_record_from_json(const nlohmann::json& doc);

// ---- extraction and hygiene -------------------------------------------

/// Visible bodies in tree order (root bodies, then a depth-first walk of occurrences).
std::vector<BodyRecord> extract_bodies(const RawAssembly& assembly);

/// Contacts, joints (both flavours) and same-occurrence hierarchical pairs
/// between visible bodies. Connections touching other bodies are dropped.
std::vector<ConnectionRecord> extract_connections(const RawAssembly& assembly, const std::vector<BodyRecord>& bodies);

/// True when every visible body carries the default material and the default appearance.
bool is_default_only(const std::vector<BodyRecord>& bodies, const MaterialCatalog& catalog);

std::vector<RawAssembly> filter_default_assemblies(std::vector<RawAssembly> assemblies, const MaterialCatalog& catalog);

ResolvedMaterial resolve_material(const BodyRecord& body, const MaterialCatalog& catalog);

/// Top-20 materials by descending count (ties: smaller id first) plus OTHER.
LabelVocabulary group_materials(const std::map<std::string, std::int64_t>& counts);

DatasetSplit split_dataset(const std::vector<std::string>& graph_ids, const SplitManifest& manifest);

}  // namespace matgraph
