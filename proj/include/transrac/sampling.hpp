#pragma once

// Fixed-length frame sampling and the multi-scale sliding-window clip sets.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "transrac/data.hpp"
#include "transrac/error.hpp"

namespace transrac {

struct SampledIndexMap {
  std::vector<int> indices;
  int source_frame_count{0};

  int size() const noexcept { return static_cast<int>(indices.size()); }
};

/// Uniform floor-spaced sampling of N frames; shorter videos are padded by
/// repeating their last frame.
inline SampledIndexMap sample_frames(int frame_count, int n) {
  if (frame_count < 1 || n < 1) throw ValidationError("sample_frames: frame_count and N must be >= 1");
  SampledIndexMap map;
  map.source_frame_count = frame_count;
  map.indices.resize(static_cast<std::size_t>(n));
  if (frame_count >= n) {
    for (int k = 0; k < n; ++k)
      map.indices[k] = static_cast<int>(static_cast<long long>(k) * frame_count / n);
  } else {
    for (int k = 0; k < n; ++k) map.indices[k] = std::min(k, frame_count - 1);
  }
  return map;
}

/// Maps each boundary b to round(b * N / frame_count), clamped to [0, N-1].
inline std::vector<CycleSpan> map_cycles_to_samples(const std::vector<CycleSpan>& cycles,
                                                    int frame_count, int n) {
  if (frame_count < 1 || n < 1)
    throw ValidationError("map_cycles_to_samples: frame_count and N must be >= 1");
  auto map = [&](int b) {
    const long long r = std::llround(static_cast<double>(b) * n / frame_count);
    return static_cast<int>(std::clamp<long long>(r, 0, n - 1));
  };
  std::vector<CycleSpan> out;
  out.reserve(cycles.size());
  for (const auto& c : cycles) {
    CycleSpan s{map(c.start_frame), map(c.end_frame)};
    if (s.start_frame > s.end_frame) s.end_frame = s.start_frame;
    out.push_back(s);
  }
  return out;
}

inline constexpr int kPadPosition = -1;

inline int scale_stride(int scale) {
  switch (scale) {
    case 1: return 1;
    case 4: return 2;
    case 8: return 4;
    default: throw ValidationError("unsupported clip scale " + std::to_string(scale));
  }
}

/// N windows of `scale` sampled positions each; kPadPosition marks positions
/// past the end of the sampled sequence.
struct ClipSet {
  int scale{1};
  int stride{1};
  std::vector<std::vector<int>> clips;

  int size() const noexcept { return static_cast<int>(clips.size()); }
};

/// Raw windows start every `stride` positions and span `scale` positions; the
/// ceil(N / stride) raw windows are each repeated `stride` times and the list
/// is cut to exactly N clips.
inline ClipSet build_clipset(int n, int scale) {
  if (n < 1) throw ValidationError("build_clipset: N must be >= 1");
  ClipSet set;
  set.scale = scale;
  set.stride = scale_stride(scale);
  set.clips.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    const int start = (t / set.stride) * set.stride;
    std::vector<int> clip(static_cast<std::size_t>(scale));
    for (int k = 0; k < scale; ++k) clip[k] = start + k < n ? start + k : kPadPosition;
    set.clips.push_back(std::move(clip));
  }
  return set;
}

/// Source frame indices of one clip; pad positions reuse the last sampled frame.
inline std::vector<int> resolve_clip(const std::vector<int>& clip, const SampledIndexMap& map) {
  std::vector<int> frames;
  frames.reserve(clip.size());
  for (int pos : clip)
    frames.push_back(pos == kPadPosition ? map.indices.back() : map.indices.at(pos));
  return frames;
}

}  // namespace transrac
