#pragma once

// Synthetic assembly corpora with known label mechanisms:
//   planted   - label follows a keyword in the body name; default-named
//               bodies take the majority label of their named neighbours
//   homophily - occurrence groups share one label; names carry nothing
//   taxonomy  - 18 materials in 6 tier-3 groups of 3; the group is uniform
//               and the grade inside it mostly follows body volume

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "matgraph/features.hpp"
#include "matgraph/ingest.hpp"

namespace matgraph {

enum class SynthKind { Planted, Homophily, Taxonomy };
const char* to_string(SynthKind kind);
SynthKind synth_kind_from_string(std::string_view name);

struct SynthOptions {
  SynthKind kind = SynthKind::Planted;
  int graphs = 200;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  double default_name_rate = 0.1;  // planted only
};

struct SynthCorpus {
  std::vector<RawAssembly> assemblies;
  MaterialCatalog catalog;
  EmbeddingTable semantic{kSemanticDim};
  SplitManifest manifest;
};

/// Catalog shared by all generators (18 materials, three tiers).
MaterialCatalog synthetic_catalog();

SynthCorpus generate_synthetic(const SynthOptions& opt);

/// Writes assemblies/<id>.json, catalog.json, semantic.tsv and split.json.
void write_synthetic(const std::filesystem::path& dir, const SynthCorpus& corpus);

}  // namespace matgraph
