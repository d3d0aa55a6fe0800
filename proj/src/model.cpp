#include "matgraph/model.hpp"

namespace matgraph {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::SageMean: return "sage_mean";
    case LayerKind::SageLstm: return "sage_lstm";
    case LayerKind::GConv: return "gconv";
  }
  return "?";
}

LayerKind layer_kind_from_string(std::string_view name) {
  if (name == "sage_mean" || name == "sage") return LayerKind::SageMean;
  if (name == "sage_lstm") return LayerKind::SageLstm;
  if (name == "gconv") return LayerKind::GConv;
  throw ConfigError("unknown layer kind '" + std::string(name) + "' (expected sage_mean, sage_lstm or gconv)");
}

void ModelConfig::validate() const {
  if (num_layers < 1 || num_layers > 8) throw ConfigError("num_layers must be in 1..8");
  if (hidden <= 0) throw ConfigError("hidden width must be positive");
  if (input_width == 0) throw ConfigError("input width must be positive");
  if (num_classes == 0) throw ConfigError("class count must be positive");
  if (leaky_slope < 0.0) throw ConfigError("leaky slope must be non-negative");
}

json ModelConfig::to_json() const {
  return {
      {"num_layers", num_layers},   {"hidden", hidden},           {"layer_kind", to_string(kind)},
      {"input_width", input_width}, {"num_classes", num_classes}, {"seed", seed},
      {"edge_features", edge_features}, {"leaky_slope", leaky_slope},
  };
}

ModelConfig ModelConfig::from_json(const json& d) {
  ModelConfig c;
  try {
    c.num_layers = d.at("num_layers").get<int>();
    c.hidden = d.at("hidden").get<int>();
    c.kind = layer_kind_from_string(d.at("layer_kind").get<std::string>());
    c.input_width = d.value("input_width", std::size_t{0});
    c.num_classes = d.value("num_classes", std::size_t{0});
    c.seed = d.value("seed", std::uint64_t{0});
    c.edge_features = d.value("edge_features", true);
    c.leaky_slope = d.value("leaky_slope", 0.2);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
  return c;
}

}  // namespace matgraph
