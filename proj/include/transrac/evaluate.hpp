#pragma once

// Counting metrics and end-to-end evaluation.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "transrac/data.hpp"
#include "transrac/error.hpp"
#include "transrac/model.hpp"
#include "transrac/pipeline.hpp"

namespace transrac {

namespace detail {
inline void check_metric_inputs(const std::vector<double>& preds, const std::vector<double>& gts) {
  if (preds.empty()) throw ValidationError("metric: empty input");
  if (preds.size() != gts.size()) throw ValidationError("metric: length mismatch");
  for (double g : gts)
    if (g < 0) throw ValidationError("metric: negative ground-truth count");
}
}  // namespace detail

/// Off-by-one accuracy: fraction of videos with |gt - pred| <= 1.
inline double obo(const std::vector<double>& preds, const std::vector<double>& gts) {
  detail::check_metric_inputs(preds, gts);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += std::abs(gts[i] - preds[i]) <= 1.0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

/// Mean of |gt - pred| / gt. Every ground truth must be positive.
inline double mae(const std::vector<double>& preds, const std::vector<double>& gts) {
  detail::check_metric_inputs(preds, gts);
  double s = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (gts[i] <= 0) throw ValidationError("mae: ground-truth count must be > 0");
    s += std::abs(gts[i] - preds[i]) / gts[i];
  }
  return s / static_cast<double>(preds.size());
}

struct MaeSkipZero {
  double value{0};                // NaN when no positive ground truth remains
  std::vector<std::size_t> excluded;  // indices with gt == 0
};

/// mae over the positive ground truths; zero-count videos are reported, not averaged.
inline MaeSkipZero mae_skip_zero(const std::vector<double>& preds, const std::vector<double>& gts) {
  detail::check_metric_inputs(preds, gts);
  MaeSkipZero out;
  std::vector<double> p, g;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (gts[i] == 0) {
      out.excluded.push_back(i);
      continue;
    }
    p.push_back(preds[i]);
    g.push_back(gts[i]);
  }
  out.value = p.empty() ? std::nan("") : mae(p, g);
  return out;
}

struct EvalRow {
  std::string video_id;
  double gt{0};
  double pred{0};
  double abs_error{0};
  bool excluded_from_mae{false};
};

struct EvalFailure {
  std::string video_id;
  std::string message;
};

struct EvalResult {
  double mae{0};
  double obo{0};
  std::vector<EvalRow> rows;        // sorted by video_id
  std::vector<EvalFailure> failures;  // videos that could not be evaluated
};

/// Recomputes the aggregates from `rows`.
inline void summarize(EvalResult& r) {
  std::vector<double> p, g;
  for (auto& row : r.rows) {
    p.push_back(row.pred);
    g.push_back(row.gt);
  }
  if (p.empty()) {
    r.mae = std::nan("");
    r.obo = std::nan("");
    return;
  }
  const auto m = mae_skip_zero(p, g);
  for (std::size_t i : m.excluded) r.rows[i].excluded_from_mae = true;
  r.mae = m.value;
  r.obo = obo(p, g);
}

struct EvalOptions {
  bool round_predictions{false};
};

/// Loads the per-frame features [T, S1, S2, d_f] of a video.
using FeatureLoader = std::function<Tensor<float>(const VideoRecord&)>;

/// Per video: sample -> clip sets -> encode -> correlate -> predict -> sum.
/// Videos whose features cannot be loaded are listed in `failures`.
template <typename T>
EvalResult evaluate(const ModelParams<T>& params, const std::vector<VideoRecord>& records,
                    const FeatureLoader& load, EvalOptions options = {}) {
  EvalResult result;
  for (const auto& rec : records) {
    try {
      const Tensor<float> frames = load(rec);
      if (frames.rank() != 4 || static_cast<int>(frames.dim(0)) != rec.frame_count)
        throw ShapeError("features cover " + std::to_string(frames.rank() ? frames.dim(0) : 0) +
                         " frames, annotation says " + std::to_string(rec.frame_count));
      const FrameFeatureProvider provider(frames);
      const auto features = prepare_features<T>(provider, rec.frame_count, params.config);
      double pred = count_from_density(forward(params, features));
      if (options.round_predictions) pred = std::round(pred);
      result.rows.push_back({rec.video_id, static_cast<double>(rec.count()), pred,
                             std::abs(rec.count() - pred), false});
    } catch (const std::exception& e) {
      result.failures.push_back({rec.video_id, e.what()});
    }
  }
  std::sort(result.rows.begin(), result.rows.end(),
            [](const EvalRow& a, const EvalRow& b) { return a.video_id < b.video_id; });
  summarize(result);
  return result;
}

/// Report CSV: video_id,gt_count,pred_count,abs_error,note, then
/// failures as video_id,,,,error:<message>.
inline std::string format_eval_report(const EvalResult& r) {
  std::ostringstream os;
  os.precision(17);
  os << "video_id,gt_count,pred_count,abs_error,note\n";
  for (const auto& row : r.rows)
    os << row.video_id << ',' << row.gt << ',' << row.pred << ',' << row.abs_error << ','
       << (row.excluded_from_mae ? "zero_count_excluded_from_mae" : "") << '\n';
  for (const auto& f : r.failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    os << f.video_id << ",,,,error: " << msg << '\n';
  }
  return os.str();
}

}  // namespace transrac
