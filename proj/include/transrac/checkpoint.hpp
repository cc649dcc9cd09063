#pragma once

// RACW checkpoint format (little-endian):
//   "RACW" | u32 version | u32 tensor_count
//   per tensor: u16 name_len | name (UTF-8) | u8 rank | u32 dims[rank] | float32 data (row-major)
//
// Tensor names:
//   meta.config                     architecture, see encode_config()
//   encoder.conv.weight / .bias     [3,3,3,d_f,d_e] / [d_e]
//   correlation.scale{1,4,8}.query  [H,d_e,d_h]   (attention mode only)
//   correlation.scale{1,4,8}.key    [H,d_e,d_h]
//   predictor.fusion.weight / .bias [3,3,C_in,C_f] / [C_f]
//   predictor.input.weight / .bias  [N*C_f,d_p] / [d_p]
//   predictor.layer{l}.{ln1.gain, ln1.bias, attn.wq, attn.bq, attn.wk, attn.bk,
//     attn.wv, attn.bv, attn.wo, attn.bo, ln2.gain, ln2.bias, ffn.w1, ffn.b1,
//     ffn.w2, ffn.b2}
//   predictor.head.weight / .bias   [d_p,1] / [1]

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "transrac/model.hpp"
#include "transrac/racf.hpp"

namespace transrac {

inline constexpr std::uint32_t kRacwVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

inline std::string encode_racw(const std::vector<NamedTensor>& tensors) {
  io::ByteWriter w;
  w.bytes("RACW");
  w.put<std::uint32_t>(kRacwVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
      throw ValidationError("RACW: tensor name too long");
    if (t.rank() > std::numeric_limits<std::uint8_t>::max())
      throw ValidationError("RACW: tensor rank too large");
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (float v : t.data) w.put<float>(v);
  }
  return w.str();
}

inline std::vector<NamedTensor> decode_racw(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (r.bytes(4) != "RACW") throw ParseError("RACW: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kRacwVersion) throw ParseError("RACW: unsupported version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    const auto len = r.get<std::uint16_t>();
    nt.name = std::string(r.bytes(len));
    const auto rank = r.get<std::uint8_t>();
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint32_t>();
    nt.tensor = Tensor<float>(shape);
    for (auto& v : nt.tensor.data) v = r.get<float>();
    out.push_back(std::move(nt));
  }
  if (!r.at_end()) throw ParseError("RACW: trailing bytes");
  return out;
}

/// meta.config layout: [layout_version=1, frames, grid_h, grid_w, feature_dim,
/// embed_dim, heads, mode (0 attention, 1 tsm), fusion_channels, predictor_dim,
/// predictor_heads, ffn_dim, layers, positional_encoding, scale_count, scales...]
inline Tensor<float> encode_config(const ModelConfig& c) {
  std::vector<float> v{1.0f,
                       float(c.frames),
                       float(c.grid_h),
                       float(c.grid_w),
                       float(c.feature_dim),
                       float(c.embed_dim),
                       float(c.heads),
                       c.mode == CorrelationMode::attention ? 0.0f : 1.0f,
                       float(c.fusion_channels),
                       float(c.predictor_dim),
                       float(c.predictor_heads),
                       float(c.ffn_dim),
                       float(c.layers),
                       c.positional_encoding ? 1.0f : 0.0f,
                       float(c.scales.size())};
  for (int s : c.scales) v.push_back(float(s));
  const std::size_t n = v.size();
  return Tensor<float>({n}, std::move(v));
}

inline ModelConfig decode_config(const Tensor<float>& t) {
  if (t.rank() != 1 || t.size() < 15 || t[0] != 1.0f)
    throw ParseError("RACW: malformed meta.config");
  auto at = [&](std::size_t i) { return static_cast<int>(t[i]); };
  ModelConfig c;
  c.frames = at(1);
  c.grid_h = at(2);
  c.grid_w = at(3);
  c.feature_dim = at(4);
  c.embed_dim = at(5);
  c.heads = at(6);
  c.mode = at(7) == 0 ? CorrelationMode::attention : CorrelationMode::tsm;
  c.fusion_channels = at(8);
  c.predictor_dim = at(9);
  c.predictor_heads = at(10);
  c.ffn_dim = at(11);
  c.layers = at(12);
  c.positional_encoding = at(13) != 0;
  const auto scale_count = static_cast<std::size_t>(at(14));
  if (t.size() != 15 + scale_count) throw ParseError("RACW: malformed meta.config scales");
  c.scales.clear();
  for (std::size_t i = 0; i < scale_count; ++i) c.scales.push_back(at(15 + i));
  c.validate();
  return c;
}

template <typename T>
std::vector<NamedTensor> model_to_tensors(const ModelParams<T>& m) {
  std::vector<NamedTensor> out{{"meta.config", encode_config(m.config)}};
  m.visit([&](const std::string& name, const Tensor<T>& t) {
    out.push_back({name, t.template cast<float>()});
  });
  return out;
}

template <typename T>
ModelParams<T> model_from_tensors(const std::vector<NamedTensor>& tensors) {
  if (tensors.empty() || tensors.front().name != "meta.config")
    throw ParseError("RACW: first tensor must be meta.config");
  ModelParams<T> m = zero_model<T>(decode_config(tensors.front().tensor));
  std::size_t i = 1;
  m.visit([&](const std::string& name, Tensor<T>& t) {
    if (i >= tensors.size()) throw ParseError("RACW: missing tensor " + name);
    const auto& nt = tensors[i++];
    if (nt.name != name) throw ParseError("RACW: expected tensor " + name + ", found " + nt.name);
    require_shape(nt.tensor.shape, t.shape, name.c_str());
    t = nt.tensor.template cast<T>();
  });
  if (i != tensors.size()) throw ParseError("RACW: unexpected extra tensors");
  return m;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& m) {
  io::write_file(path, encode_racw(model_to_tensors(m)));
}

template <typename T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path) {
  return model_from_tensors<T>(decode_racw(io::read_file(path)));
}

}  // namespace transrac
