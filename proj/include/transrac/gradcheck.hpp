#pragma once

// Central finite-difference verification of the analytic gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "transrac/model.hpp"
#include "transrac/training.hpp"

namespace transrac {

struct TensorGradError {
  std::string name;
  double max_rel_error{0};
  std::size_t checked{0};
  std::size_t skipped{0};  // perturbation crossed a ReLU / max-pool branch
  bool under_sampled{false};
};

struct GradReport {
  std::vector<TensorGradError> tensors;
  double global_max{0};
  double threshold{1e-4};
  bool pass{false};
};

inline constexpr std::size_t kMinCheckedPerTensor = 25;

struct GradCheckOptions {
  double eps{1e-5};
  double threshold{1e-4};
  /// Tensors larger than this are checked on a seeded subsample of this many scalars.
  std::size_t max_per_tensor{48};
  /// Denominator floor: err = |a - n| / max(|a|, |n|, floor).
  double abs_floor{1e-6};
  int batch_items{2};
  /// Applied to the analytic gradients before comparison (sensitivity tests).
  std::function<void(ModelParams<double>&)> corrupt;
};

/// Random inputs and nonnegative targets matching `cfg`.
inline std::vector<Example<double>> random_examples(const ModelConfig& cfg, std::uint64_t seed,
                                                    int count) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Shape shape{static_cast<std::size_t>(cfg.frames), static_cast<std::size_t>(cfg.grid_h),
                    static_cast<std::size_t>(cfg.grid_w), static_cast<std::size_t>(cfg.feature_dim)};
  std::vector<Example<double>> out;
  for (int b = 0; b < count; ++b) {
    Example<double> ex;
    ex.video_id = "random_" + std::to_string(b);
    for (std::size_t s = 0; s < cfg.scales.size(); ++s) {
      Tensor<double> f(shape);
      for (auto& v : f.data) v = u(rng);
      ex.features.push_back(std::move(f));
    }
    ex.target = Tensor<double>({static_cast<std::size_t>(cfg.frames)});
    for (auto& v : ex.target.data) v = 0.5 * (u(rng) + 1.0);
    out.push_back(std::move(ex));
  }
  return out;
}

/// Compares analytic gradients of the batch-mean MSE against central
/// differences on a randomly initialized float64 model.
inline GradReport grad_check(const ModelConfig& cfg, std::uint64_t seed,
                             const GradCheckOptions& opt = {}) {
  ModelParams<double> params = init_model<double>(cfg, seed);
  // Random biases so no parameter sits at a symmetric point.
  std::mt19937_64 rng(seed ^ 0xA5A5A5A5ULL);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  params.visit([&](const std::string& name, Tensor<double>& t) {
    if (name.find("bias") != std::string::npos || name.find(".b") != std::string::npos)
      for (auto& v : t.data) v += u(rng);
  });
  const double head_bound = std::sqrt(6.0 / (cfg.predictor_dim + 1.0));
  for (auto& v : params.predictor.head_weight.data) v = head_bound * u(rng);

  const auto examples = random_examples(cfg, seed + 1, opt.batch_items);
  std::vector<const Example<double>*> batch;
  for (const auto& ex : examples) batch.push_back(&ex);

  // Lift the head bias so every frame's ReLU head is active with margin.
  double min_pre = 0;
  for (const auto* ex : batch) {
    ModelCache<double> cache;
    forward(params, ex->features, &cache);
    for (double v : cache.predictor.head_pre) min_pre = std::min(min_pre, v);
  }
  params.predictor.head_bias[0] += 0.2 - min_pre;

  LossAndGrad<double> analytic = forward_backward(params, batch);
  if (opt.corrupt) opt.corrupt(analytic.grad);
  std::vector<const Tensor<double>*> grads;
  analytic.grad.visit([&](const std::string&, const Tensor<double>& t) { grads.push_back(&t); });

  std::uint64_t base_sig = 0;
  batch_loss(params, batch, &base_sig);

  GradReport report;
  bool under_sampled = false;
  report.threshold = opt.threshold;
  std::size_t tensor_index = 0;
  params.visit([&](const std::string& name, Tensor<double>& t) {
    const Tensor<double>& g = *grads[tensor_index++];
    TensorGradError te;
    te.name = name;

    // Seeded order; scalars whose perturbation changes a branch are replaced
    // by the next candidate.
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() > opt.max_per_tensor) detail::seeded_shuffle(idx, seed * 7919 + tensor_index);
    const std::size_t wanted = std::min(opt.max_per_tensor, idx.size());
    for (std::size_t i : idx) {
      if (te.checked == wanted) break;
      const double orig = t[i];
      std::uint64_t sig_plus = 0, sig_minus = 0;
      t[i] = orig + opt.eps;
      const double lp = batch_loss(params, batch, &sig_plus);
      t[i] = orig - opt.eps;
      const double lm = batch_loss(params, batch, &sig_minus);
      t[i] = orig;
      if (sig_plus != base_sig || sig_minus != base_sig) {
        ++te.skipped;
        continue;
      }
      const double numeric = (lp - lm) / (2.0 * opt.eps);
      const double a = g[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.abs_floor});
      te.max_rel_error = std::max(te.max_rel_error, std::abs(a - numeric) / denom);
      ++te.checked;
    }
    report.global_max = std::max(report.global_max, te.max_rel_error);
    te.under_sampled = te.checked < std::min<std::size_t>(wanted, kMinCheckedPerTensor);
    under_sampled = under_sampled || te.under_sampled;
    report.tensors.push_back(std::move(te));
  });
  report.pass = report.global_max <= opt.threshold && !under_sampled;
  return report;
}

}  // namespace transrac
