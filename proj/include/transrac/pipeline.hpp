#pragma once

// Glue from an annotated video with per-frame features to model inputs.

#include <string>
#include <vector>

#include "transrac/data.hpp"
#include "transrac/encoder.hpp"
#include "transrac/model.hpp"
#include "transrac/sampling.hpp"
#include "transrac/targets.hpp"

namespace transrac {

/// Samples N frames and gathers clip features for every configured scale.
template <typename T>
ScaleFeatures<T> prepare_features(const FeatureProvider& provider, int frame_count,
                                  const ModelConfig& cfg) {
  const SampledIndexMap map = sample_frames(frame_count, cfg.frames);
  const GridDims dims{cfg.grid_h, cfg.grid_w, cfg.feature_dim};
  ScaleFeatures<T> out;
  for (int scale : cfg.scales)
    out.push_back(provide_features<T>(build_clipset(cfg.frames, scale), map, provider, dims));
  return out;
}

template <typename T>
struct Example {
  std::string video_id;
  ScaleFeatures<T> features;
  Tensor<T> target;  // [N]
  double count{0};
};

/// Builds a training/evaluation example from a record and its per-frame
/// features [T, S1, S2, d_f] (T must equal the record's frame_count).
template <typename T>
Example<T> make_example(const VideoRecord& record, const Tensor<float>& frame_features,
                        const ModelConfig& cfg, TargetVariant variant,
                        double sigma_floor = kDefaultSigmaFloor) {
  if (frame_features.rank() != 4 ||
      static_cast<int>(frame_features.dim(0)) != record.frame_count)
    throw ShapeError(record.video_id + ": feature sequence " + shape_string(frame_features.shape) +
                     " does not cover frame_count " + std::to_string(record.frame_count));
  const FrameFeatureProvider provider(frame_features);
  Example<T> ex;
  ex.video_id = record.video_id;
  ex.features = prepare_features<T>(provider, record.frame_count, cfg);
  const auto spans = map_cycles_to_samples(record.cycles, record.frame_count, cfg.frames);
  ex.target = make_density_target(spans, cfg.frames, variant, sigma_floor).template cast<T>();
  ex.count = record.count();
  return ex;
}

}  // namespace transrac
