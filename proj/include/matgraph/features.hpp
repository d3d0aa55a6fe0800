#pragma once

// Per-body and per-assembly feature encoders and the FeatureSchema that
// ties encoder outputs to node-feature columns.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "matgraph/ingest.hpp"
#include "matgraph/json.hpp"

namespace matgraph {

namespace block {
inline constexpr const char* kBodyName = "body_name";
inline constexpr const char* kOccurrenceName = "occurrence_name";
inline constexpr const char* kBodyPhysical = "body_physical";
inline constexpr const char* kOccurrencePhysical = "occurrence_physical";
inline constexpr const char* kBodyGeometry = "body_geometry";
inline constexpr const char* kGlobal = "global";
inline constexpr const char* kMaterialOnehot = "material_onehot";
inline constexpr const char* kTierOnehot = "tier_onehot";
/// Ablation alias covering both name blocks.
inline constexpr const char* kSemanticNames = "SemanticNames";
}  // namespace block

inline constexpr std::size_t kSemanticDim = 600;
inline constexpr std::size_t kVisualDim = 512;
inline constexpr std::size_t kBodyPhysicalWidth = 5;
inline constexpr std::size_t kOccurrencePhysicalWidth = 2;
inline constexpr std::size_t kGlobalScalarWidth = 9;  // assembly volume, com xyz, 5 geometric counts
inline constexpr std::size_t kEdgeWidth = 3;
inline constexpr const char* kDefaultNamePattern = R"(^(Body|Component|Occurrence)\s*\d*$)";

struct FeatureBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t width = 0;
  bool ablatable = false;
  bool operator==(const FeatureBlock&) const = default;
};

class FeatureSchema {
 public:
  const std::vector<FeatureBlock>& blocks() const { return blocks_; }
  std::size_t node_width() const;
  static constexpr std::size_t edge_width() { return kEdgeWidth; }

  const FeatureBlock* find(std::string_view name) const;
  bool has(std::string_view name) const { return find(name) != nullptr; }

  void append(std::string name, std::size_t width, bool ablatable);
  void insert(std::size_t position, std::string name, std::size_t width, bool ablatable);
  void remove(std::string_view name);

  /// Stable digest of block names and widths.
  std::string digest() const;

  json to_json() const;
  static FeatureSchema from_json(const json& doc);
  bool operator==(const FeatureSchema&) const = default;

 private:
  void reflow();
  std::vector<FeatureBlock> blocks_;
};

struct FieldStats {
  double mean = 0.0;
  double std = 0.0;
  bool operator==(const FieldStats&) const = default;
};

/// Z-score statistics per named scalar field, fitted on training data.
struct NormStats {
  std::map<std::string, FieldStats> fields;

  static NormStats fit(const std::map<std::string, std::vector<double>>& samples);
  /// (x - mean) / std, or 0 for constant and unknown fields.
  double z(const std::string& field, double x) const;
  json to_json() const;
  static NormStats from_json(const json& doc);
};

inline constexpr std::array<const char*, 7> kPhysicalFields = {
    "body_area", "body_volume", "body_com_x", "body_com_y", "body_com_z", "occurrence_area", "occurrence_volume"};
inline constexpr std::array<const char*, 9> kGlobalFields = {
    "assembly_volume", "assembly_com_x", "assembly_com_y", "assembly_com_z", "edges", "faces", "loops", "shells", "vertices"};

/// Token -> vector lookup with per-dimension statistics over all entries.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = kSemanticDim) : dim_(dim), sum_(dim, 0.0), sumsq_(dim, 0.0) {}

  /// Text format: "DIM <n>" then one "token<TAB>f1 f2 ... fn" line per entry.
  static EmbeddingTable parse(std::string_view text);
  static EmbeddingTable load(const std::filesystem::path& path);
  std::string serialize() const;

  void insert(const std::string& token, std::vector<float> vec);
  const std::vector<float>* find(const std::string& token) const;
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  /// Per-dimension (mean, population std) over the stored vectors.
  std::vector<FieldStats> stats() const;

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<float>> vectors_;
  std::vector<std::string> order_;
  std::vector<double> sum_, sumsq_;
};

/// Lowercased alphanumeric tokens with default-name tokens removed.
std::vector<std::string> clean_name(const std::string& name, const std::regex& default_pattern);

std::vector<float> encode_semantic(const std::string& name, const EmbeddingTable& table, std::uint64_t seed,
                                   const std::regex& default_pattern);
std::vector<float> encode_semantic(const std::string& name, const EmbeddingTable& table, std::uint64_t seed);

struct PhysicalFeatures {
  std::array<float, kBodyPhysicalWidth> body{};
  std::array<float, kOccurrencePhysicalWidth> occurrence{};
};
PhysicalFeatures normalize_physical(const BodyRecord& body, const NormStats& stats);

/// Stored vector when the table has the UUID; otherwise a unit-norm vector
/// seeded by a hash of the UUID (stand-in for the external visual encoder).
std::vector<float> visual_embedding(const std::string& uuid, const EmbeddingTable* table, std::size_t dim = kVisualDim);

std::array<float, kEdgeWidth> encode_connection(ConnectionKind kind);

struct GlobalVocabulary {
  std::vector<std::string> categories;
  std::vector<std::string> industries;
  std::vector<std::string> products;
  std::size_t width() const { return kGlobalScalarWidth + categories.size() + industries.size() + products.size(); }
  static GlobalVocabulary fit(const std::vector<AssemblyMeta>& metas);
};

std::vector<float> encode_global(const AssemblyMeta& meta, const GlobalVocabulary& vocab, const NormStats& stats);

std::vector<float> encode_material_onehot(std::int32_t label, std::size_t num_classes);

struct TierVocabulary {
  std::array<std::vector<std::string>, 3> tiers;
  static TierVocabulary fit(const MaterialCatalog& catalog);
  std::size_t width(int depth) const;
};

/// Concatenated one-hots for tiers 1..depth of the material; a tier the
/// material lacks contributes a zero block.
std::vector<float> encode_tier(const std::string& material_id, const MaterialCatalog& catalog,
                               const TierVocabulary& tiers, int depth);

/// Everything fitted on the training split, serialised into corpora and checkpoints.
struct FittedState {
  NormStats physical;
  NormStats global;
  GlobalVocabulary global_vocab;
  TierVocabulary tiers;
  LabelVocabulary labels;
  MaterialCatalog catalog;
  std::size_t semantic_dim = kSemanticDim;
  std::size_t visual_dim = kVisualDim;
  std::string default_name_pattern = kDefaultNamePattern;
  std::uint64_t imputation_seed = 0;
  std::string semantic_table;  // path recorded for serving; may be empty
  std::string visual_table;

  json to_json() const;
  static FittedState from_json(const json& doc);
};

/// Fits normalisation statistics and vocabularies on training assemblies.
FittedState fit_state(const std::vector<std::vector<BodyRecord>>& bodies, const std::vector<AssemblyMeta>& metas,
                      const std::map<std::string, std::int64_t>& label_counts, const MaterialCatalog& catalog);

/// Encodes base node rows (names, physical, geometry, global) per the fitted state.
class FeatureEncoder {
 public:
  FeatureEncoder(FittedState state, std::shared_ptr<const EmbeddingTable> semantic,
                 std::shared_ptr<const EmbeddingTable> visual);

  const FittedState& state() const { return state_; }
  FeatureSchema base_schema() const;
  std::vector<float> encode_body(const BodyRecord& body, const std::vector<float>& global_row) const;
  std::vector<float> encode_global_row(const AssemblyMeta& meta) const;

 private:
  FittedState state_;
  std::shared_ptr<const EmbeddingTable> semantic_;
  std::shared_ptr<const EmbeddingTable> visual_;
  std::regex default_pattern_;
};

}  // namespace matgraph
