#pragma once

// Whole-pipeline parameters and the forward/backward pass from per-scale clip
// features to the density map.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "transrac/config.hpp"
#include "transrac/correlation.hpp"
#include "transrac/encoder.hpp"
#include "transrac/predictor.hpp"

namespace transrac {

template <typename T>
struct ModelParams {
  ModelConfig config;
  EncoderParams<T> encoder;
  std::vector<AttentionHeads<T>> attention;  // one entry per scale; empty in TSM mode
  PredictorParams<T> predictor;

  /// Visits every trainable tensor with its stable checkpoint name.
  template <typename F>
  void visit(F&& f) {
    f("encoder.conv.weight", encoder.weight);
    f("encoder.conv.bias", encoder.bias);
    for (std::size_t s = 0; s < attention.size(); ++s) {
      const std::string prefix = "correlation.scale" + std::to_string(config.scales[s]);
      f(prefix + ".query", attention[s].query);
      f(prefix + ".key", attention[s].key);
    }
    predictor.visit(f);
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<ModelParams*>(this)->visit([&](const std::string& name, Tensor<T>& t) {
      f(name, static_cast<const Tensor<T>&>(t));
    });
  }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    visit([&](const std::string&, const Tensor<T>& t) { total += t.size(); });
    return total;
  }

  template <typename U>
  ModelParams<U> cast() const;
};

/// Allocates all tensors for `config`, zero-filled (also used for gradients).
template <typename T>
ModelParams<T> zero_model(const ModelConfig& config) {
  config.validate();
  const auto N = static_cast<std::size_t>(config.frames);
  const auto df = static_cast<std::size_t>(config.feature_dim);
  const auto de = static_cast<std::size_t>(config.embed_dim);
  const auto H = static_cast<std::size_t>(config.heads);
  const auto dh = static_cast<std::size_t>(config.head_dim());
  const auto cin = static_cast<std::size_t>(config.correlation_channels());
  const auto cf = static_cast<std::size_t>(config.fusion_channels);
  const auto dp = static_cast<std::size_t>(config.predictor_dim);
  const auto dff = static_cast<std::size_t>(config.ffn_dim);

  ModelParams<T> m;
  m.config = config;
  m.encoder.weight = Tensor<T>({3, 3, 3, df, de});
  m.encoder.bias = Tensor<T>({de});
  if (config.mode == CorrelationMode::attention)
    for (std::size_t s = 0; s < config.scales.size(); ++s)
      m.attention.push_back({Tensor<T>({H, de, dh}), Tensor<T>({H, de, dh})});

  auto& p = m.predictor;
  p.fusion_weight = Tensor<T>({3, 3, cin, cf});
  p.fusion_bias = Tensor<T>({cf});
  p.input_weight = Tensor<T>({N * cf, dp});
  p.input_bias = Tensor<T>({dp});
  p.positional = config.positional_encoding ? sinusoidal_positions<T>(N, dp) : Tensor<T>({N, dp});
  for (int l = 0; l < config.layers; ++l) {
    TransformerLayerParams<T> layer;
    layer.heads = config.predictor_heads;
    layer.ln1_gain = Tensor<T>({dp});
    layer.ln1_bias = Tensor<T>({dp});
    layer.wq = layer.wk = layer.wv = layer.wo = Tensor<T>({dp, dp});
    layer.bq = layer.bk = layer.bv = layer.bo = Tensor<T>({dp});
    layer.ln2_gain = Tensor<T>({dp});
    layer.ln2_bias = Tensor<T>({dp});
    layer.ffn_w1 = Tensor<T>({dp, dff});
    layer.ffn_b1 = Tensor<T>({dff});
    layer.ffn_w2 = Tensor<T>({dff, dp});
    layer.ffn_b2 = Tensor<T>({dp});
    p.layers.push_back(std::move(layer));
  }
  p.head_weight = Tensor<T>({dp, 1});
  p.head_bias = Tensor<T>({1});
  return m;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out = zero_model<U>(config);
  std::vector<const Tensor<T>*> src;
  visit([&](const std::string&, const Tensor<T>& t) { src.push_back(&t); });
  std::size_t i = 0;
  out.visit([&](const std::string&, Tensor<U>& t) { t = src[i++]->template cast<U>(); });
  return out;
}

/// Seeded initialization.
///
/// Attention projections: U[-a, a], a = sqrt(6 / (d_e + d_h)). Convolutions:
/// U[-a, a] with a = sqrt(6 / fan_in). Dense layers: Glorot uniform. Layer-norm
/// gains 1, biases 0. The head weight starts at zero and the head bias at
/// `head_bias`, so every frame of the ReLU head is active at step 0.
template <typename T>
ModelParams<T> init_model(const ModelConfig& config, std::uint64_t seed, double head_bias = 0.1) {
  ModelParams<T> m = zero_model<T>(config);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto uniform = [&](Tensor<T>& t, double a) {
    for (auto& v : t.data) v = static_cast<T>(a * unit(rng));
  };
  auto glorot = [&](Tensor<T>& t) {
    uniform(t, std::sqrt(6.0 / static_cast<double>(t.dim(0) + t.dim(1))));
  };

  uniform(m.encoder.weight, std::sqrt(6.0 / (27.0 * config.feature_dim)));
  const double attn_bound = std::sqrt(6.0 / (config.embed_dim + config.head_dim()));
  for (auto& heads : m.attention) {
    uniform(heads.query, attn_bound);
    uniform(heads.key, attn_bound);
  }
  auto& p = m.predictor;
  uniform(p.fusion_weight, std::sqrt(6.0 / (9.0 * config.correlation_channels())));
  glorot(p.input_weight);
  for (auto& layer : p.layers) {
    layer.ln1_gain.fill(T{1});
    layer.ln2_gain.fill(T{1});
    glorot(layer.wq);
    glorot(layer.wk);
    glorot(layer.wv);
    glorot(layer.wo);
    glorot(layer.ffn_w1);
    glorot(layer.ffn_w2);
  }
  p.head_bias[0] = static_cast<T>(head_bias);
  return m;
}

/// Clip features of one video: one [N, S1, S2, d_f] tensor per configured scale.
template <typename T>
using ScaleFeatures = std::vector<Tensor<T>>;

template <typename T>
struct ModelCache {
  std::vector<Tensor<T>> conv_out;                // per scale [N, S1, S2, d_e]
  std::vector<std::vector<std::uint32_t>> argmax;  // per scale [N * d_e]
  std::vector<Tensor<T>> embeddings;              // per scale [N, d_e]
  std::vector<AttentionCache<T>> attention;
  std::vector<Tensor<T>> correlation;             // per scale [N, N, H or 1]
  PredictorCache<T> predictor;
};

/// Correlation tensor of one video: encoder -> per-scale correlation -> fusion.
template <typename T>
Tensor<T> correlate(const ModelParams<T>& m, const ScaleFeatures<T>& features,
                    ModelCache<T>* cache = nullptr) {
  const auto& cfg = m.config;
  if (features.size() != cfg.scales.size())
    throw ShapeError("model: expected " + std::to_string(cfg.scales.size()) +
                     " scale feature tensors, got " + std::to_string(features.size()));
  const Shape want{static_cast<std::size_t>(cfg.frames), static_cast<std::size_t>(cfg.grid_h),
                   static_cast<std::size_t>(cfg.grid_w), static_cast<std::size_t>(cfg.feature_dim)};
  std::vector<Tensor<T>> per_scale;
  if (cache) *cache = {};
  for (std::size_t s = 0; s < features.size(); ++s) {
    require_shape(features[s].shape, want, "model scale features");
    Tensor<T> conv = temporal_context(features[s], m.encoder);
    std::vector<std::uint32_t> argmax;
    Tensor<T> x = spatial_maxpool(conv, &argmax);
    Tensor<T> corr;
    if (cfg.mode == CorrelationMode::attention) {
      AttentionCache<T> ac;
      corr = attention_correlation(x, m.attention[s], cache ? &ac : nullptr);
      if (cache) cache->attention.push_back(std::move(ac));
    } else {
      corr = tsm_correlation(x);
    }
    if (cache) {
      cache->conv_out.push_back(std::move(conv));
      cache->argmax.push_back(std::move(argmax));
      cache->embeddings.push_back(std::move(x));
      cache->correlation.push_back(corr);
    }
    per_scale.push_back(std::move(corr));
  }
  return fuse_scales(per_scale);
}

/// Full forward pass to the density map [N].
template <typename T>
Tensor<T> forward(const ModelParams<T>& m, const ScaleFeatures<T>& features,
                  ModelCache<T>* cache = nullptr) {
  const Tensor<T> fused = correlate(m, features, cache);
  return predict_density(fused, m.predictor, cache ? &cache->predictor : nullptr);
}

/// Accumulates dL/dparams into `grad` given dL/d(density).
template <typename T>
void backward(const ModelParams<T>& m, const ScaleFeatures<T>& features, const ModelCache<T>& cache,
              const Tensor<T>& d_density, ModelParams<T>& grad) {
  const Tensor<T> d_fused = predict_density_backward(m.predictor, cache.predictor, d_density,
                                                     grad.predictor);
  const std::size_t per = d_fused.dim(2) / m.config.scales.size();
  for (std::size_t s = 0; s < m.config.scales.size(); ++s) {
    const Tensor<T> d_corr = slice_channels(d_fused, s * per, per);
    const Tensor<T>& x = cache.embeddings[s];
    Tensor<T> dx = m.config.mode == CorrelationMode::attention
                       ? attention_correlation_backward(x, m.attention[s], cache.attention[s],
                                                        d_corr, grad.attention[s])
                       : tsm_correlation_backward(x, cache.correlation[s], d_corr);
    const Tensor<T> d_conv = spatial_maxpool_backward(cache.conv_out[s].shape, cache.argmax[s], dx);
    temporal_context_backward(features[s], cache.conv_out[s], d_conv, grad.encoder);
  }
}

/// Hash of every piecewise-linear branch taken in a forward pass (ReLU signs,
/// max-pool winners). Equal hashes mean two nearby inputs share one smooth piece.
template <typename T>
std::uint64_t activation_signature(const ModelCache<T>& cache) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  for (const auto& t : cache.conv_out)
    for (T v : t.data) mix(v > T{0});
  for (const auto& a : cache.argmax)
    for (auto v : a) mix(v);
  for (T v : cache.predictor.fused.data) mix(v > T{0});
  for (const auto& l : cache.predictor.layers)
    for (T v : l.f1) mix(v > T{0});
  for (T v : cache.predictor.head_pre) mix(v > T{0});
  return h;
}

}  // namespace transrac
