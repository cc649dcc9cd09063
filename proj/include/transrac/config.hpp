#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "transrac/error.hpp"

namespace transrac {

enum class CorrelationMode { attention, tsm };

inline std::string to_string(CorrelationMode m) {
  return m == CorrelationMode::attention ? "attention" : "tsm";
}

inline CorrelationMode parse_correlation_mode(const std::string& s) {
  if (s == "attention") return CorrelationMode::attention;
  if (s == "tsm") return CorrelationMode::tsm;
  throw ValidationError("unknown correlation mode '" + s + "'");
}

/// Architecture dimensions shared by every stage of the pipeline.
struct ModelConfig {
  int frames{64};  // N
  int grid_h{2};
  int grid_w{2};
  int feature_dim{16};  // d_f
  int embed_dim{32};    // d_e
  int heads{4};         // H
  std::vector<int> scales{1, 4, 8};
  CorrelationMode mode{CorrelationMode::attention};
  int fusion_channels{8};  // C_f
  int predictor_dim{64};   // d_p
  int predictor_heads{4};  // H_p
  int ffn_dim{64};         // d_ff
  int layers{1};
  bool positional_encoding{true};

  int head_dim() const { return embed_dim / heads; }
  int correlation_channels() const {
    const int per_scale = mode == CorrelationMode::attention ? heads : 1;
    return static_cast<int>(scales.size()) * per_scale;
  }

  void validate() const {
    auto positive = [](int v, const char* name) {
      if (v < 1) throw ValidationError(std::string("model config: ") + name + " must be >= 1");
    };
    positive(frames, "frames");
    positive(grid_h, "grid_h");
    positive(grid_w, "grid_w");
    positive(feature_dim, "feature_dim");
    positive(embed_dim, "embed_dim");
    positive(heads, "heads");
    positive(fusion_channels, "fusion_channels");
    positive(predictor_dim, "predictor_dim");
    positive(predictor_heads, "predictor_heads");
    positive(ffn_dim, "ffn_dim");
    if (layers < 0) throw ValidationError("model config: layers must be >= 0");
    if (embed_dim % heads != 0)
      throw ValidationError("model config: embed_dim must be divisible by heads");
    if (predictor_dim % predictor_heads != 0)
      throw ValidationError("model config: predictor_dim must be divisible by predictor_heads");
    if (scales.empty()) throw ValidationError("model config: scales must be nonempty");
    for (std::size_t i = 0; i < scales.size(); ++i) {
      if (scales[i] != 1 && scales[i] != 4 && scales[i] != 8)
        throw ValidationError("model config: scales must be drawn from {1, 4, 8}");
      if (i > 0 && scales[i] <= scales[i - 1])
        throw ValidationError("model config: scales must be strictly increasing");
    }
  }

  /// Small dimensions for tests and CPU training.
  static ModelConfig desk() { return {}; }

  /// Dimensions used for gradient verification.
  static ModelConfig gradcheck() {
    ModelConfig c;
    c.frames = 8;
    c.feature_dim = 8;
    c.embed_dim = 16;
    c.predictor_dim = 32;
    c.ffn_dim = 32;
    return c;
  }

  /// Full-size dimensions (7x7x768 backbone grid, 512-wide embeddings and predictor).
  static ModelConfig full() {
    ModelConfig c;
    c.grid_h = c.grid_w = 7;
    c.feature_dim = 768;
    c.embed_dim = 512;
    c.fusion_channels = 32;
    c.predictor_dim = 512;
    c.ffn_dim = 512;
    return c;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace transrac
