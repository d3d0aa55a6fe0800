#include "matgraph/features.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "matgraph/errors.hpp"
#include "matgraph/util.hpp"

namespace matgraph {

// ---- FeatureSchema ----------------------------------------------------

std::size_t FeatureSchema::node_width() const {
  return blocks_.empty() ? 0 : blocks_.back().offset + blocks_.back().width;
}

const FeatureBlock* FeatureSchema::find(std::string_view name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return &b;
  return nullptr;
}

void FeatureSchema::append(std::string name, std::size_t width, bool ablatable) {
  insert(blocks_.size(), std::move(name), width, ablatable);
}

void FeatureSchema::insert(std::size_t position, std::string name, std::size_t width, bool ablatable) {
  if (has(name)) throw SchemaError("feature block '" + name + "' already present");
  position = std::min(position, blocks_.size());
  blocks_.insert(blocks_.begin() + static_cast<std::ptrdiff_t>(position), FeatureBlock{std::move(name), 0, width, ablatable});
  reflow();
}

void FeatureSchema::remove(std::string_view name) {
  auto it = std::find_if(blocks_.begin(), blocks_.end(), [&](const FeatureBlock& b) { return b.name == name; });
  if (it == blocks_.end()) throw ConfigError("unknown feature block '" + std::string(name) + "'");
  blocks_.erase(it);
  reflow();
}

void FeatureSchema::reflow() {
  std::size_t off = 0;
  for (auto& b : blocks_) {
    b.offset = off;
    off += b.width;
  }
}

std::string FeatureSchema::digest() const {
  std::string canon;
  for (const auto& b : blocks_) canon += b.name + ":" + std::to_string(b.width) + ";";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canon)));
  return buf;
}

json FeatureSchema::to_json() const {
  json blocks = json::array();
  for (const auto& b : blocks_)
    blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"width", b.width}, {"ablatable", b.ablatable}});
  return {{"blocks", std::move(blocks)}, {"node_width", node_width()}, {"edge_width", kEdgeWidth}};
}

FeatureSchema FeatureSchema::from_json(const json& doc) {
  FeatureSchema s;
  try {
    for (const auto& b : doc.at("blocks"))
      s.append(b.at("name").get<std::string>(), b.at("width").get<std::size_t>(), b.value("ablatable", false));
    if (doc.contains("node_width") && doc["node_width"].get<std::size_t>() != s.node_width())
      throw SchemaError("schema node_width disagrees with its blocks");
  } catch (const json::exception& e) {
    throw SchemaError(std::string("invalid feature schema: ") + e.what());
  }
  return s;
}

// ---- NormStats --------------------------------------------------------

NormStats NormStats::fit(const std::map<std::string, std::vector<double>>& samples) {
  NormStats out;
  for (const auto& [name, values] : samples) {
    const MeanStd ms = mean_std(values);
    out.fields[name] = {ms.mean, ms.std};
  }
  return out;
}

double NormStats::z(const std::string& field, double x) const {
  auto it = fields.find(field);
  if (it == fields.end() || !(it->second.std > 0.0)) return 0.0;
  return (x - it->second.mean) / it->second.std;
}

json NormStats::to_json() const {
  json out = json::object();
  for (const auto& [name, f] : fields) out[name] = {{"mean", f.mean}, {"std", f.std}};
  return out;
}

NormStats NormStats::from_json(const json& doc) {
  NormStats out;
  for (const auto& [name, f] : doc.items()) out.fields[name] = {f.at("mean").get<double>(), f.at("std").get<double>()};
  return out;
}

// ---- EmbeddingTable ---------------------------------------------------

EmbeddingTable EmbeddingTable::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("DIM ", 0) != 0) throw SchemaError("embedding table must start with 'DIM <n>'");
  const long dim = std::strtol(line.c_str() + 4, nullptr, 10);
  if (dim <= 0) throw SchemaError("embedding table dimension must be positive");
  EmbeddingTable table(static_cast<std::size_t>(dim));
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw SchemaError("embedding table line " + std::to_string(lineno) + " has no tab");
    std::vector<float> vec;
    vec.reserve(table.dim_);
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      float v = 0.0f;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw SchemaError("embedding table line " + std::to_string(lineno) + " has a bad number");
      vec.push_back(v);
      p = next;
    }
    table.insert(line.substr(0, tab), std::move(vec));
  }
  return table;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

std::string EmbeddingTable::serialize() const {
  std::string out = "DIM " + std::to_string(dim_) + "\n";
  char buf[32];
  for (const auto& token : order_) {
    out += token;
    out += '\t';
    const auto& vec = vectors_.at(token);
    for (std::size_t i = 0; i < vec.size(); ++i) {
      if (i) out += ' ';
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, vec[i]);
      out.append(buf, end);
    }
    out += '\n';
  }
  return out;
}

void EmbeddingTable::insert(const std::string& token, std::vector<float> vec) {
  if (vec.size() != dim_)
    throw SchemaError("embedding for '" + token + "' has " + std::to_string(vec.size()) + " values, expected " +
                      std::to_string(dim_));
  auto it = vectors_.find(token);
  if (it != vectors_.end()) {
    for (std::size_t d = 0; d < dim_; ++d) {
      sum_[d] -= it->second[d];
      sumsq_[d] -= double(it->second[d]) * it->second[d];
    }
  } else {
    order_.push_back(token);
  }
  for (std::size_t d = 0; d < dim_; ++d) {
    sum_[d] += vec[d];
    sumsq_[d] += double(vec[d]) * vec[d];
  }
  vectors_[token] = std::move(vec);
}

const std::vector<float>* EmbeddingTable::find(const std::string& token) const {
  auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

std::vector<FieldStats> EmbeddingTable::stats() const {
  std::vector<FieldStats> out(dim_);
  const double n = static_cast<double>(vectors_.size());
  if (n == 0) return out;
  for (std::size_t d = 0; d < dim_; ++d) {
    const double m = sum_[d] / n;
    out[d] = {m, std::sqrt(std::max(0.0, sumsq_[d] / n - m * m))};
  }
  return out;
}

// ---- semantic names ---------------------------------------------------

std::vector<std::string> clean_name(const std::string& name, const std::regex& default_pattern) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !std::regex_match(cur, default_pattern)) tokens.push_back(cur);
    cur.clear();
  };
  for (unsigned char ch : name) {
    if (std::isalnum(ch) || ch >= 0x80) {
      cur += static_cast<char>(std::tolower(ch));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::vector<float> encode_semantic(const std::string& name, const EmbeddingTable& table, std::uint64_t seed,
                                   const std::regex& default_pattern) {
  std::vector<float> out(table.dim(), 0.0f);
  std::string trimmed = name;
  trimmed.erase(0, trimmed.find_first_not_of(" \t"));
  trimmed.erase(trimmed.find_last_not_of(" \t") + 1);
  if (trimmed.empty() || std::regex_match(trimmed, default_pattern)) return out;
  std::vector<std::string> tokens = clean_name(trimmed, default_pattern);
  if (tokens.empty()) return out;

  // Sorting fixes the summation order, so keyword order cannot change the bits.
  std::sort(tokens.begin(), tokens.end());
  std::vector<double> acc(table.dim(), 0.0);
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    if (const auto* v = table.find(t)) {
      for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += (*v)[d];
      ++hits;
    }
  }
  if (hits) {
    for (std::size_t d = 0; d < acc.size(); ++d) out[d] = static_cast<float>(acc[d] / double(hits));
    return out;
  }

  std::string key;
  for (const auto& t : tokens) key += t + " ";
  std::mt19937_64 rng(mix_seed(seed, fnv1a64(key)));
  std::normal_distribution<double> unit(0.0, 1.0);
  const auto stats = table.stats();
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = static_cast<float>(stats[d].mean + stats[d].std * unit(rng));
  return out;
}

std::vector<float> encode_semantic(const std::string& name, const EmbeddingTable& table, std::uint64_t seed) {
  static const std::regex pattern(kDefaultNamePattern, std::regex::icase | std::regex::ECMAScript);
  return encode_semantic(name, table, seed, pattern);
}

// ---- physical, visual, connection -------------------------------------

PhysicalFeatures normalize_physical(const BodyRecord& b, const NormStats& s) {
  PhysicalFeatures f;
  const double body[5] = {b.area, b.volume, b.center_of_mass.x, b.center_of_mass.y, b.center_of_mass.z};
  for (std::size_t i = 0; i < 5; ++i) f.body[i] = static_cast<float>(s.z(kPhysicalFields[i], body[i]));
  f.occurrence[0] = static_cast<float>(s.z(kPhysicalFields[5], b.occurrence_area));
  f.occurrence[1] = static_cast<float>(s.z(kPhysicalFields[6], b.occurrence_volume));
  return f;
}

std::vector<float> visual_embedding(const std::string& uuid, const EmbeddingTable* table, std::size_t dim) {
  if (table) {
    if (const auto* v = table->find(uuid)) {
      if (v->size() != dim) throw SchemaError("visual table dimension differs from the requested width");
      return *v;
    }
  }
  std::mt19937_64 rng(fnv1a64(uuid));
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> raw(dim);
  double norm = 0.0;
  for (auto& v : raw) {
    v = unit(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<float>(raw[d] / norm);
  return out;
}

std::array<float, kEdgeWidth> encode_connection(ConnectionKind kind) {
  std::array<float, kEdgeWidth> out{};
  out[static_cast<std::size_t>(kind)] = 1.0f;
  return out;
}

// ---- global block -----------------------------------------------------

namespace {

std::vector<std::string> sorted_unique(std::set<std::string> values) {
  values.erase("");
  return {values.begin(), values.end()};
}

std::ptrdiff_t position(const std::vector<std::string>& sorted, const std::string& value) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), value);
  return (it != sorted.end() && *it == value) ? it - sorted.begin() : -1;
}

std::array<double, kGlobalScalarWidth> global_scalars(const AssemblyMeta& m) {
  return {m.volume,       m.center_of_mass.x, m.center_of_mass.y, m.center_of_mass.z, m.geometric[0],
          m.geometric[1], m.geometric[2],     m.geometric[3],     m.geometric[4]};
}

}  // namespace

GlobalVocabulary GlobalVocabulary::fit(const std::vector<AssemblyMeta>& metas) {
  std::set<std::string> cat, ind, prod;
  for (const auto& m : metas) {
    cat.insert(m.category);
    ind.insert(m.industry);
    prod.insert(m.products.begin(), m.products.end());
  }
  return {sorted_unique(cat), sorted_unique(ind), sorted_unique(prod)};
}

std::vector<float> encode_global(const AssemblyMeta& meta, const GlobalVocabulary& vocab, const NormStats& stats) {
  std::vector<float> out(vocab.width(), 0.0f);
  const auto scalars = global_scalars(meta);
  for (std::size_t i = 0; i < kGlobalScalarWidth; ++i) out[i] = static_cast<float>(stats.z(kGlobalFields[i], scalars[i]));
  std::size_t off = kGlobalScalarWidth;
  if (auto p = position(vocab.categories, meta.category); p >= 0) out[off + p] = 1.0f;
  off += vocab.categories.size();
  if (auto p = position(vocab.industries, meta.industry); p >= 0) out[off + p] = 1.0f;
  off += vocab.industries.size();
  for (const auto& prod : meta.products)
    if (auto p = position(vocab.products, prod); p >= 0) out[off + p] = 1.0f;
  return out;
}

// ---- label-derived blocks ---------------------------------------------

std::vector<float> encode_material_onehot(std::int32_t label, std::size_t num_classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
    throw ConfigError("material label " + std::to_string(label) + " outside vocabulary");
  std::vector<float> out(num_classes, 0.0f);
  out[label] = 1.0f;
  return out;
}

TierVocabulary TierVocabulary::fit(const MaterialCatalog& catalog) {
  std::array<std::set<std::string>, 3> sets;
  for (const auto& [id, m] : catalog.entries) {
    sets[0].insert(m.tier1);
    sets[1].insert(m.tier2);
    sets[2].insert(m.tier3);
  }
  TierVocabulary v;
  for (int t = 0; t < 3; ++t) v.tiers[t] = sorted_unique(sets[t]);
  return v;
}

std::size_t TierVocabulary::width(int depth) const {
  if (depth < 0 || depth > 3) throw ConfigError("tier depth must be in 0..3");
  std::size_t w = 0;
  for (int t = 0; t < depth; ++t) w += tiers[t].size();
  return w;
}

std::vector<float> encode_tier(const std::string& material_id, const MaterialCatalog& catalog,
                               const TierVocabulary& tiers, int depth) {
  std::vector<float> out(tiers.width(depth), 0.0f);
  const auto names = catalog.tiers(material_id);
  std::size_t off = 0;
  for (int t = 0; t < depth; ++t) {
    if (auto p = position(tiers.tiers[t], names[t]); p >= 0) out[off + p] = 1.0f;
    off += tiers.tiers[t].size();
  }
  return out;
}

// ---- fitted state -----------------------------------------------------

json FittedState::to_json() const {
  return {
      {"physical", physical.to_json()},
      {"global", global.to_json()},
      {"global_vocab",
       {{"categories", global_vocab.categories},
        {"industries", global_vocab.industries},
        {"products", global_vocab.products}}},
      {"tiers", {tiers.tiers[0], tiers.tiers[1], tiers.tiers[2]}},
      {"labels", label_vocabulary_to_json(labels)},
      {"catalog", catalog_to_json(catalog)},
      {"semantic_dim", semantic_dim},
      {"visual_dim", visual_dim},
      {"default_name_pattern", default_name_pattern},
      {"imputation_seed", imputation_seed},
      {"semantic_table", semantic_table},
      {"visual_table", visual_table},
  };
}

FittedState FittedState::from_json(const json& d) {
  FittedState s;
  try {
    s.physical = NormStats::from_json(d.at("physical"));
    s.global = NormStats::from_json(d.at("global"));
    const auto& gv = d.at("global_vocab");
    s.global_vocab = {gv.at("categories").get<std::vector<std::string>>(),
                      gv.at("industries").get<std::vector<std::string>>(),
                      gv.at("products").get<std::vector<std::string>>()};
    for (int t = 0; t < 3; ++t) s.tiers.tiers[t] = d.at("tiers").at(t).get<std::vector<std::string>>();
    s.labels = label_vocabulary_from_json(d.at("labels"));
    s.catalog = parse_catalog(d.at("catalog").dump());
    s.semantic_dim = d.at("semantic_dim").get<std::size_t>();
    s.visual_dim = d.at("visual_dim").get<std::size_t>();
    s.default_name_pattern = d.at("default_name_pattern").get<std::string>();
    s.imputation_seed = d.at("imputation_seed").get<std::uint64_t>();
    s.semantic_table = d.value("semantic_table", "");
    s.visual_table = d.value("visual_table", "");
  } catch (const json::exception& e) {
    throw SchemaError(std::string("invalid fitted state: ") + e.what());
  }
  return s;
}

FittedState fit_state(const std::vector<std::vector<BodyRecord>>& bodies, const std::vector<AssemblyMeta>& metas,
                      const std::map<std::string, std::int64_t>& label_counts, const MaterialCatalog& catalog) {
  std::map<std::string, std::vector<double>> phys, glob;
  for (const auto& assembly : bodies)
    for (const auto& b : assembly) {
      const double vals[7] = {b.area, b.volume, b.center_of_mass.x, b.center_of_mass.y, b.center_of_mass.z,
                              b.occurrence_area, b.occurrence_volume};
      for (std::size_t i = 0; i < 7; ++i) phys[kPhysicalFields[i]].push_back(vals[i]);
    }
  for (const auto& m : metas) {
    const auto s = global_scalars(m);
    for (std::size_t i = 0; i < kGlobalScalarWidth; ++i) glob[kGlobalFields[i]].push_back(s[i]);
  }
  FittedState st;
  st.physical = NormStats::fit(phys);
  st.global = NormStats::fit(glob);
  st.global_vocab = GlobalVocabulary::fit(metas);
  st.tiers = TierVocabulary::fit(catalog);
  st.labels = group_materials(label_counts);
  st.catalog = catalog;
  return st;
}

// ---- FeatureEncoder ---------------------------------------------------

FeatureEncoder::FeatureEncoder(FittedState state, std::shared_ptr<const EmbeddingTable> semantic,
                               std::shared_ptr<const EmbeddingTable> visual)
    : state_(std::move(state)), semantic_(std::move(semantic)), visual_(std::move(visual)) {
  try {
    default_pattern_ = std::regex(state_.default_name_pattern, std::regex::icase | std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw ConfigError("invalid default-name pattern: " + std::string(e.what()));
  }
  if (!semantic_) semantic_ = std::make_shared<const EmbeddingTable>(state_.semantic_dim);
  if (semantic_->dim() != state_.semantic_dim) throw SchemaError("semantic table dimension differs from fitted state");
  if (visual_ && visual_->dim() != state_.visual_dim) throw SchemaError("visual table dimension differs from fitted state");
}

FeatureSchema FeatureEncoder::base_schema() const {
  FeatureSchema s;
  s.append(block::kBodyName, state_.semantic_dim, true);
  s.append(block::kOccurrenceName, state_.semantic_dim, true);
  s.append(block::kBodyPhysical, kBodyPhysicalWidth, true);
  s.append(block::kOccurrencePhysical, kOccurrencePhysicalWidth, true);
  s.append(block::kBodyGeometry, state_.visual_dim, true);
  s.append(block::kGlobal, state_.global_vocab.width(), true);
  return s;
}

std::vector<float> FeatureEncoder::encode_global_row(const AssemblyMeta& meta) const {
  return encode_global(meta, state_.global_vocab, state_.global);
}

std::vector<float> FeatureEncoder::encode_body(const BodyRecord& body, const std::vector<float>& global_row) const {
  std::vector<float> row;
  row.reserve(2 * state_.semantic_dim + kBodyPhysicalWidth + kOccurrencePhysicalWidth + state_.visual_dim +
              global_row.size());
  auto put = [&row](const auto& v) { row.insert(row.end(), v.begin(), v.end()); };
  put(encode_semantic(body.body_name, *semantic_, state_.imputation_seed, default_pattern_));
  put(encode_semantic(body.occurrence_name, *semantic_, state_.imputation_seed, default_pattern_));
  const auto phys = normalize_physical(body, state_.physical);
  put(phys.body);
  put(phys.occurrence);
  put(visual_embedding(body.uuid, visual_.get(), state_.visual_dim));
  put(global_row);
  return row;
}

}  // namespace matgraph
