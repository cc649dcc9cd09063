#pragma once

// Loss, exact gradients, optimizers and the seeded training loop.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "transrac/config.hpp"
#include "transrac/error.hpp"
#include "transrac/model.hpp"
#include "transrac/pipeline.hpp"
#include "transrac/targets.hpp"

namespace transrac {

/// (1/N) * sum_i (pred_i - target_i)^2
template <typename T>
double mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.size() != target.size() || pred.size() == 0)
    throw ShapeError("mse_loss: length mismatch (" + std::to_string(pred.size()) + " vs " +
                     std::to_string(target.size()) + ")");
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

template <typename T>
struct LossAndGrad {
  double loss{0};
  ModelParams<T> grad;
};

/// Mean MSE over the batch and exact gradients of it w.r.t. every trainable
/// tensor. Items are processed in order, so the reduction is deterministic.
template <typename T>
LossAndGrad<T> forward_backward(const ModelParams<T>& params,
                                const std::vector<const Example<T>*>& batch) {
  if (batch.empty()) throw ValidationError("forward_backward: empty batch");
  LossAndGrad<T> out{0.0, zero_model<T>(params.config)};
  const T inv_batch = T{1} / static_cast<T>(batch.size());
  for (const Example<T>* ex : batch) {
    ModelCache<T> cache;
    const Tensor<T> pred = forward(params, ex->features, &cache);
    const double loss = mse_loss(pred, ex->target);
    if (!std::isfinite(loss)) throw NumericError("forward_backward: non-finite loss on " + ex->video_id);
    out.loss += loss / static_cast<double>(batch.size());
    Tensor<T> d_pred(pred.shape);
    const T scale = T{2} / static_cast<T>(pred.size()) * inv_batch;
    for (std::size_t i = 0; i < pred.size(); ++i) d_pred[i] = scale * (pred[i] - ex->target[i]);
    backward(params, ex->features, cache, d_pred, out.grad);
  }
  return out;
}

/// Batch-mean loss without gradients.
template <typename T>
double batch_loss(const ModelParams<T>& params, const std::vector<const Example<T>*>& batch,
                  std::uint64_t* signature = nullptr) {
  double total = 0;
  std::uint64_t sig = 0;
  for (const Example<T>* ex : batch) {
    ModelCache<T> cache;
    const Tensor<T> pred = forward(params, ex->features, signature ? &cache : nullptr);
    total += mse_loss(pred, ex->target);
    if (signature) sig = sig * 31 + activation_signature(cache);
  }
  if (signature) *signature = sig;
  return total / static_cast<double>(batch.size());
}

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  std::string preset{"desk"};
  int frames{0};  // 0: preset value
  double learning_rate{1e-3};
  int batch_size{4};
  int steps{1000};
  OptimizerKind optimizer{OptimizerKind::adam};
  double beta1{0.9};
  double beta2{0.999};
  double adam_eps{1e-8};
  double min_lr_fraction{0.1};
  std::uint64_t seed{0};
  TargetVariant variant{TargetVariant::mid};
  CorrelationMode correlation_mode{CorrelationMode::attention};
  std::vector<int> scales{1, 4, 8};
  double sigma_floor{kDefaultSigmaFloor};
  // Architecture overrides; 0 keeps the preset value.
  int embed_dim{0};
  int heads{0};
  int fusion_channels{0};
  int predictor_dim{0};
  int predictor_heads{0};
  int ffn_dim{0};
  int layers{-1};
  int positional_encoding{-1};
  double head_bias_init{0.1};
  // Grid dims; taken from the data when training on files.
  int grid_h{0};
  int grid_w{0};
  int feature_dim{0};
  std::string precision{"float64"};

  void validate() const {
    if (!(learning_rate > 0)) throw ValidationError("train config: learning_rate must be > 0");
    if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    if (steps < 0) throw ValidationError("train config: steps must be >= 0");
    if (scales.empty()) throw ValidationError("train config: scales must be nonempty");
    if (frames < 0) throw ValidationError("train config: frames must be >= 0");
    if (precision != "float32" && precision != "float64")
      throw ValidationError("train config: precision must be float32 or float64");
  }

  /// Full-scale optimization settings (8e-6, batch 16, 16K steps) on the
  /// full-size architecture.
  static TrainConfig full() {
    TrainConfig c;
    c.preset = "full";
    c.learning_rate = 8e-6;
    c.batch_size = 16;
    c.steps = 16000;
    return c;
  }

  /// Model dimensions: preset, then overrides, then grid dims.
  ModelConfig model_config() const {
    ModelConfig m;
    if (preset == "desk") m = ModelConfig::desk();
    else if (preset == "full") m = ModelConfig::full();
    else if (preset == "gradcheck") m = ModelConfig::gradcheck();
    else throw ValidationError("train config: unknown preset '" + preset + "'");
    if (frames > 0) m.frames = frames;
    m.scales = scales;
    m.mode = correlation_mode;
    if (embed_dim > 0) m.embed_dim = embed_dim;
    if (heads > 0) m.heads = heads;
    if (fusion_channels > 0) m.fusion_channels = fusion_channels;
    if (predictor_dim > 0) m.predictor_dim = predictor_dim;
    if (predictor_heads > 0) m.predictor_heads = predictor_heads;
    if (ffn_dim > 0) m.ffn_dim = ffn_dim;
    if (layers >= 0) m.layers = layers;
    if (positional_encoding >= 0) m.positional_encoding = positional_encoding != 0;
    if (grid_h > 0) m.grid_h = grid_h;
    if (grid_w > 0) m.grid_w = grid_w;
    if (feature_dim > 0) m.feature_dim = feature_dim;
    m.validate();
    return m;
  }
};

namespace detail {

template <typename V>
V json_get(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("train config key '") + key + "': " + e.what());
  }
}

}  // namespace detail

/// Parses a JSON object whose keys are TrainConfig field names; missing keys
/// keep defaults, unknown keys are rejected.
inline TrainConfig parse_train_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("train config must be a JSON object");
  TrainConfig c;
  if (j.contains("preset") && detail::json_get<std::string>(j, "preset") == "full")
    c = TrainConfig::full();
  for (const auto& [key, value] : j.items()) {
    const char* k = key.c_str();
    if (key == "preset") c.preset = detail::json_get<std::string>(j, k);
    else if (key == "frames") c.frames = detail::json_get<int>(j, k);
    else if (key == "learning_rate") c.learning_rate = detail::json_get<double>(j, k);
    else if (key == "batch_size") c.batch_size = detail::json_get<int>(j, k);
    else if (key == "steps") c.steps = detail::json_get<int>(j, k);
    else if (key == "optimizer") {
      const auto s = detail::json_get<std::string>(j, k);
      if (s == "adam") c.optimizer = OptimizerKind::adam;
      else if (s == "sgd") c.optimizer = OptimizerKind::sgd;
      else throw ValidationError("train config: unknown optimizer '" + s + "'");
    } else if (key == "beta1") c.beta1 = detail::json_get<double>(j, k);
    else if (key == "beta2") c.beta2 = detail::json_get<double>(j, k);
    else if (key == "adam_eps") c.adam_eps = detail::json_get<double>(j, k);
    else if (key == "min_lr_fraction") c.min_lr_fraction = detail::json_get<double>(j, k);
    else if (key == "seed") c.seed = detail::json_get<std::uint64_t>(j, k);
    else if (key == "variant") c.variant = parse_target_variant(detail::json_get<std::string>(j, k));
    else if (key == "correlation_mode")
      c.correlation_mode = parse_correlation_mode(detail::json_get<std::string>(j, k));
    else if (key == "scales") c.scales = detail::json_get<std::vector<int>>(j, k);
    else if (key == "sigma_floor") c.sigma_floor = detail::json_get<double>(j, k);
    else if (key == "embed_dim") c.embed_dim = detail::json_get<int>(j, k);
    else if (key == "heads") c.heads = detail::json_get<int>(j, k);
    else if (key == "fusion_channels") c.fusion_channels = detail::json_get<int>(j, k);
    else if (key == "predictor_dim") c.predictor_dim = detail::json_get<int>(j, k);
    else if (key == "predictor_heads") c.predictor_heads = detail::json_get<int>(j, k);
    else if (key == "ffn_dim") c.ffn_dim = detail::json_get<int>(j, k);
    else if (key == "layers") c.layers = detail::json_get<int>(j, k);
    else if (key == "positional_encoding")
      c.positional_encoding = detail::json_get<bool>(j, k) ? 1 : 0;
    else if (key == "head_bias_init") c.head_bias_init = detail::json_get<double>(j, k);
    else if (key == "grid_h") c.grid_h = detail::json_get<int>(j, k);
    else if (key == "grid_w") c.grid_w = detail::json_get<int>(j, k);
    else if (key == "feature_dim") c.feature_dim = detail::json_get<int>(j, k);
    else if (key == "precision") c.precision = detail::json_get<std::string>(j, k);
    else throw ValidationError("train config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

/// Adam (with bias correction) or plain SGD over a ModelParams tree.
template <typename T>
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const ModelConfig& model)
      : kind_(cfg.optimizer), beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.adam_eps) {
    if (kind_ == OptimizerKind::adam) {
      m_ = zero_model<T>(model);
      v_ = zero_model<T>(model);
    }
  }

  void step(ModelParams<T>& params, const ModelParams<T>& grad, double lr) {
    std::vector<const Tensor<T>*> g;
    grad.visit([&](const std::string&, const Tensor<T>& t) { g.push_back(&t); });
    if (kind_ == OptimizerKind::sgd) {
      std::size_t i = 0;
      params.visit([&](const std::string&, Tensor<T>& p) {
        const Tensor<T>& gt = *g[i++];
        for (std::size_t k = 0; k < p.size(); ++k) p[k] -= static_cast<T>(lr) * gt[k];
      });
      return;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    std::vector<Tensor<T>*> ms, vs;
    m_.visit([&](const std::string&, Tensor<T>& t) { ms.push_back(&t); });
    v_.visit([&](const std::string&, Tensor<T>& t) { vs.push_back(&t); });
    std::size_t i = 0;
    params.visit([&](const std::string&, Tensor<T>& p) {
      const Tensor<T>& gt = *g[i];
      Tensor<T>& m = *ms[i];
      Tensor<T>& v = *vs[i];
      ++i;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double gk = static_cast<double>(gt[k]);
        m[k] = static_cast<T>(beta1_ * m[k] + (1.0 - beta1_) * gk);
        v[k] = static_cast<T>(beta2_ * v[k] + (1.0 - beta2_) * gk * gk);
        const double mhat = m[k] / c1, vhat = v[k] / c2;
        p[k] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps_));
      }
    });
  }

 private:
  OptimizerKind kind_;
  double beta1_, beta2_, eps_;
  std::uint64_t t_{0};
  ModelParams<T> m_, v_;
};

/// Cosine decay from lr to lr * min_fraction over `steps`.
inline double learning_rate_at(const TrainConfig& cfg, int step) {
  if (cfg.steps <= 1) return cfg.learning_rate;
  const double lo = cfg.learning_rate * cfg.min_lr_fraction;
  const double progress = static_cast<double>(step) / static_cast<double>(cfg.steps - 1);
  return lo + 0.5 * (cfg.learning_rate - lo) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
struct TrainResult {
  ModelParams<T> params;
  std::vector<double> history;  // loss per step
};

/// Seeded mini-batch training. Batches are drawn in order from a permutation
/// of the dataset that is reshuffled at each epoch.
template <typename T>
TrainResult<T> train(const std::vector<Example<T>>& dataset, const TrainConfig& cfg,
                     const ModelConfig& model,
                     const std::function<void(int, double)>& on_step = {}) {
  cfg.validate();
  if (dataset.empty()) throw ValidationError("train: empty dataset");
  TrainResult<T> result{init_model<T>(model, cfg.seed, cfg.head_bias_init), {}};
  Optimizer<T> opt(cfg, model);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t epoch = 0;
  std::size_t cursor = order.size();
  std::vector<const Example<T>*> batch;
  for (int step = 0; step < cfg.steps; ++step) {
    batch.clear();
    while (static_cast<int>(batch.size()) < cfg.batch_size) {
      if (cursor == order.size()) {
        detail::seeded_shuffle(order, cfg.seed + 0x5851F42D4C957F2DULL * ++epoch);
        cursor = 0;
      }
      batch.push_back(&dataset[order[cursor++]]);
    }
    LossAndGrad<T> lg;
    try {
      lg = forward_backward(result.params, batch);
    } catch (const NumericError& e) {
      throw NumericError("train: diverged at step " + std::to_string(step) + ": " + e.what());
    }
    result.history.push_back(lg.loss);
    opt.step(result.params, lg.grad, learning_rate_at(cfg, step));
    if (on_step) on_step(step, lg.loss);
  }
  return result;
}

}  // namespace transrac
