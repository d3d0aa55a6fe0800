#pragma once

// File-level pipeline stages: assembly directory -> records, records ->
// graph corpus (bundle directory plus manifest.json).

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "matgraph/features.hpp"
#include "matgraph/graph.hpp"
#include "matgraph/ingest.hpp"
#include "matgraph/json.hpp"

namespace matgraph {

struct AssemblyRecords {
  std::string assembly_id;
  std::vector<BodyRecord> bodies;
  std::vector<ConnectionRecord> connections;
  AssemblyMeta meta;
};

struct Dropped {
  std::string id;
  std::string reason;
};

struct IngestResult {
  std::vector<AssemblyRecords> kept;  // sorted by assembly id
  std::vector<Dropped> dropped;
  std::size_t parsed = 0;
};

/// Records for one assembly (visible bodies and their connections).
AssemblyRecords records_from_assembly(const RawAssembly& a);

/// Filters default-only assemblies and converts the rest to records.
IngestResult ingest_assemblies(const std::vector<RawAssembly>& assemblies, const MaterialCatalog& catalog);

/// Parses every *.json file in `dir`. A file that fails to parse is an error.
std::vector<RawAssembly> load_assembly_directory(const std::filesystem::path& dir, int jobs);

json records_to_json(const IngestResult& r);
IngestResult records_from_json(const json& doc);

struct BuildOptions {
  SplitManifest manifest;
  std::shared_ptr<const EmbeddingTable> semantic;
  std::shared_ptr<const EmbeddingTable> visual;  // null: hash-seeded stub
  std::string semantic_path;
  std::string visual_path;
  std::string name_pattern = kDefaultNamePattern;
  std::uint64_t imputation_seed = 0;
  int jobs = 1;
};

struct Corpus {
  FittedState state;
  FeatureSchema schema;
  DatasetSplit split;
  SplitManifest manifest;
  std::vector<AssemblyGraph> graphs;  // sorted by graph id
  std::vector<Dropped> dropped;

  const AssemblyGraph& get(const std::string& id) const;
  std::vector<const AssemblyGraph*> subset(const std::vector<std::string>& ids) const;
  std::vector<const AssemblyGraph*> all() const;
};

/// Applies the discard rule, splits, fits encoders on the training split and
/// encodes every kept assembly.
Corpus build_corpus(const std::vector<AssemblyRecords>& records, const MaterialCatalog& catalog,
                    const BuildOptions& options);

json corpus_manifest(const Corpus& c);
void write_corpus(const std::filesystem::path& dir, const Corpus& c);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace matgraph
