#include "matgraph/checkpoint.hpp"

#include <cstdio>
#include <cstring>

#include "matgraph/errors.hpp"
#include "matgraph/util.hpp"

namespace matgraph {

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float get_f32(std::string_view in, std::size_t at) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= std::uint32_t(static_cast<unsigned char>(in[at + i])) << (8 * i);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

std::string serialize_params(const ad::ParamStore<float>& params, json header) {
  json tensors = json::array();
  std::string blob;
  for (const auto& name : params.names()) {
    const auto& t = params.get(name);
    tensors.push_back({{"name", name},
                       {"shape", {t.rows, t.cols}},
                       {"offset", blob.size()},
                       {"trainable", t.requires_grad}});
    for (float v : t.data) put_f32(blob, v);
  }
  header["tensors"] = std::move(tensors);
  header["blob_bytes"] = blob.size();
  const std::string text = header.dump();
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u64(out, text.size());
  out += text;
  out += blob;
  return out;
}

ad::ParamStore<float> deserialize_params(std::string_view bytes, json* header_out) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw SchemaError("not a checkpoint (bad magic)");
  const std::uint64_t hlen = get_u64(bytes, 8);
  if (16 + hlen > bytes.size()) throw SchemaError("checkpoint header truncated");
  json header;
  try {
    header = json::parse(bytes.substr(16, hlen));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what(), e.byte);
  }
  const std::size_t blob_at = 16 + hlen;
  const std::size_t blob_len = header.at("blob_bytes").get<std::size_t>();
  if (blob_at + blob_len != bytes.size()) throw SchemaError("checkpoint blob length mismatch");
  ad::ParamStore<float> ps;
  for (const auto& t : header.at("tensors")) {
    const std::size_t rows = t.at("shape").at(0), cols = t.at("shape").at(1);
    const std::size_t off = t.at("offset");
    if (off + rows * cols * 4 > blob_len) throw SchemaError("checkpoint tensor exceeds blob");
    ad::Tensor<float> v(rows, cols);
    for (std::size_t k = 0; k < v.size(); ++k) v.data[k] = get_f32(bytes, blob_at + off + 4 * k);
    ps.add(t.at("name").get<std::string>(), std::move(v), t.at("trainable").get<bool>());
  }
  if (header_out) *header_out = std::move(header);
  return ps;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  json header = {
      {"format", 1},
      {"model", c.model.to_json()},
      {"schema", c.schema.to_json()},
      {"fitted_state", c.state.to_json()},
      {"training", c.training},
  };
  return serialize_params(c.params, std::move(header));
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Checkpoint c;
  json header;
  c.params = deserialize_params(bytes, &header);
  try {
    c.model = ModelConfig::from_json(header.at("model"));
    c.schema = FeatureSchema::from_json(header.at("schema"));
    c.state = FittedState::from_json(header.at("fitted_state"));
    c.training = header.value("training", json::object());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("invalid checkpoint header: ") + e.what());
  }
  if (c.schema.node_width() != c.model.input_width) throw SchemaError("checkpoint schema width differs from model input");
  return c;
}

std::string Checkpoint::id() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize_checkpoint(*this))));
  return buf;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_text_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_text_file(path)); }

}  // namespace matgraph
