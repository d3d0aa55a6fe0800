#pragma once

// Checkpoint file: 8-byte magic, little-endian u64 header length, JSON
// header, then the parameter blob as little-endian float32.

#include <filesystem>
#include <string>
#include <string_view>

#include "matgraph/features.hpp"
#include "matgraph/json.hpp"
#include "matgraph/model.hpp"
#include "matgraph/optim.hpp"

namespace matgraph {

inline constexpr char kCheckpointMagic[8] = {'M', 'G', 'C', 'K', 'P', 'T', '0', '1'};

struct Checkpoint {
  ModelConfig model;
  FeatureSchema schema;
  FittedState state;
  json training = json::object();  // train config, protocol, history summary
  ad::ParamStore<float> params;

  /// Digest of the serialised bytes; stable across save/load.
  std::string id() const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameter-only round trip in the same tensor format.
std::string serialize_params(const ad::ParamStore<float>& params, json header);
ad::ParamStore<float> deserialize_params(std::string_view bytes, json* header_out = nullptr);

}  // namespace matgraph
