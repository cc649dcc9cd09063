#pragma once

// Per-clip grid features, temporal-context 3D convolution and spatial max-pool.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "transrac/error.hpp"
#include "transrac/sampling.hpp"
#include "transrac/tensor.hpp"

namespace transrac {

struct GridDims {
  int height{0};
  int width{0};
  int channels{0};
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Stand-in for a frozen video backbone: turns the source frames of one clip
/// into a [S1, S2, d_f] grid feature.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual GridDims dims() const = 0;
  virtual Tensor<float> grid(std::span<const int> frames) const = 0;
};

/// Serves clips from per-frame features [T, S1, S2, d_f] (synthetic or RACF),
/// averaging the clip's frames.
class FrameFeatureProvider final : public FeatureProvider {
 public:
  explicit FrameFeatureProvider(Tensor<float> frames) : frames_(std::move(frames)) {
    if (frames_.rank() != 4 || frames_.dim(0) == 0)
      throw ShapeError("frame features must be [T, S1, S2, d_f] with T >= 1");
  }

  GridDims dims() const override {
    return {static_cast<int>(frames_.dim(1)), static_cast<int>(frames_.dim(2)),
            static_cast<int>(frames_.dim(3))};
  }
  int frame_count() const { return static_cast<int>(frames_.dim(0)); }

  Tensor<float> grid(std::span<const int> frames) const override {
    const std::size_t cell = frames_.dim(1) * frames_.dim(2) * frames_.dim(3);
    Tensor<float> out({frames_.dim(1), frames_.dim(2), frames_.dim(3)});
    if (frames.empty()) return out;
    for (int f : frames) {
      if (f < 0 || static_cast<std::size_t>(f) >= frames_.dim(0))
        throw ValidationError("frame index " + std::to_string(f) + " outside feature sequence");
      const float* src = frames_.ptr() + static_cast<std::size_t>(f) * cell;
      for (std::size_t i = 0; i < cell; ++i) out[i] += src[i];
    }
    const float inv = 1.0f / static_cast<float>(frames.size());
    for (auto& v : out.data) v *= inv;
    return out;
  }

 private:
  Tensor<float> frames_;
};

/// Adapts a callable; handy for constant and test providers.
class FunctionProvider final : public FeatureProvider {
 public:
  using Fn = std::function<Tensor<float>(std::span<const int>)>;
  FunctionProvider(GridDims dims, Fn fn) : dims_(dims), fn_(std::move(fn)) {}
  GridDims dims() const override { return dims_; }
  Tensor<float> grid(std::span<const int> frames) const override { return fn_(frames); }

 private:
  GridDims dims_;
  Fn fn_;
};

/// Collects provider output for every clip: [N, S1, S2, d_f].
template <typename T>
Tensor<T> provide_features(const ClipSet& clips, const SampledIndexMap& map,
                           const FeatureProvider& provider, GridDims expected) {
  const GridDims dims = provider.dims();
  if (dims != expected)
    throw ShapeError("feature provider dims [" + std::to_string(dims.height) + ", " +
                     std::to_string(dims.width) + ", " + std::to_string(dims.channels) +
                     "] do not match configured [" + std::to_string(expected.height) + ", " +
                     std::to_string(expected.width) + ", " + std::to_string(expected.channels) +
                     "]");
  const Shape grid_shape{static_cast<std::size_t>(dims.height),
                         static_cast<std::size_t>(dims.width),
                         static_cast<std::size_t>(dims.channels)};
  const std::size_t cell = shape_size(grid_shape);
  Tensor<T> out({clips.clips.size(), grid_shape[0], grid_shape[1], grid_shape[2]});
  for (std::size_t t = 0; t < clips.clips.size(); ++t) {
    const auto frames = resolve_clip(clips.clips[t], map);
    const Tensor<float> g = provider.grid(frames);
    if (g.shape != grid_shape)
      throw ShapeError("provider returned shape " + shape_string(g.shape) + " for clip " +
                       std::to_string(t));
    if (!g.all_finite())
      throw NumericError("provider returned a non-finite value for clip " + std::to_string(t));
    for (std::size_t i = 0; i < cell; ++i) out[t * cell + i] = static_cast<T>(g[i]);
  }
  return out;
}

/// Temporal-context convolution weights: [3, 3, 3, d_f, d_e] (time, height,
/// width, in, out) and d_e biases.
template <typename T>
struct EncoderParams {
  Tensor<T> weight;
  Tensor<T> bias;
};

/// 3x3x3 convolution over (time, height, width) with stride 1 and zero "same"
/// padding, followed by ReLU.
template <typename T>
Tensor<T> temporal_context(const Tensor<T>& x, const EncoderParams<T>& p) {
  if (x.rank() != 4) throw ShapeError("temporal_context: input must be [N, S1, S2, d_f]");
  const std::size_t n = x.dim(0), sh = x.dim(1), sw = x.dim(2), cin = x.dim(3);
  if (p.weight.rank() != 5 || p.weight.dim(3) != cin)
    throw ShapeError("temporal_context: kernel " + shape_string(p.weight.shape) +
                     " incompatible with input " + shape_string(x.shape));
  require_shape(p.weight.shape, {3, 3, 3, cin, p.weight.dim(4)}, "temporal_context kernel");
  const std::size_t cout = p.weight.dim(4);
  require_shape(p.bias.shape, {cout}, "temporal_context bias");

  Tensor<T> out({n, sh, sw, cout});
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t y = 0; y < sh; ++y)
      for (std::size_t xx = 0; xx < sw; ++xx) {
        T* o = out.ptr() + ((t * sh + y) * sw + xx) * cout;
        for (std::size_t c = 0; c < cout; ++c) o[c] = p.bias[c];
        for (int kt = 0; kt < 3; ++kt) {
          const long tt = static_cast<long>(t) + kt - 1;
          if (tt < 0 || tt >= static_cast<long>(n)) continue;
          for (int ky = 0; ky < 3; ++ky) {
            const long yy = static_cast<long>(y) + ky - 1;
            if (yy < 0 || yy >= static_cast<long>(sh)) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const long xs = static_cast<long>(xx) + kx - 1;
              if (xs < 0 || xs >= static_cast<long>(sw)) continue;
              const T* in = x.ptr() + ((tt * sh + yy) * sw + xs) * cin;
              const T* w = p.weight.ptr() + ((kt * 3 + ky) * 3 + kx) * cin * cout;
              for (std::size_t i = 0; i < cin; ++i) {
                const T a = in[i];
                const T* wr = w + i * cout;
                for (std::size_t c = 0; c < cout; ++c) o[c] += a * wr[c];
              }
            }
          }
        }
        for (std::size_t c = 0; c < cout; ++c) o[c] = o[c] > T{0} ? o[c] : T{0};
      }
  return out;
}

/// Accumulates kernel and bias gradients given the post-ReLU output and its
/// upstream gradient. The input features are constants of the model.
template <typename T>
void temporal_context_backward(const Tensor<T>& x, const Tensor<T>& out, const Tensor<T>& d_out,
                               EncoderParams<T>& grad) {
  const std::size_t n = x.dim(0), sh = x.dim(1), sw = x.dim(2), cin = x.dim(3);
  const std::size_t cout = out.dim(3);
  std::vector<T> dz(cout);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t y = 0; y < sh; ++y)
      for (std::size_t xx = 0; xx < sw; ++xx) {
        const std::size_t base = ((t * sh + y) * sw + xx) * cout;
        bool any = false;
        for (std::size_t c = 0; c < cout; ++c) {
          dz[c] = out[base + c] > T{0} ? d_out[base + c] : T{0};
          any = any || dz[c] != T{0};
          grad.bias[c] += dz[c];
        }
        if (!any) continue;
        for (int kt = 0; kt < 3; ++kt) {
          const long tt = static_cast<long>(t) + kt - 1;
          if (tt < 0 || tt >= static_cast<long>(n)) continue;
          for (int ky = 0; ky < 3; ++ky) {
            const long yy = static_cast<long>(y) + ky - 1;
            if (yy < 0 || yy >= static_cast<long>(sh)) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const long xs = static_cast<long>(xx) + kx - 1;
              if (xs < 0 || xs >= static_cast<long>(sw)) continue;
              const T* in = x.ptr() + ((tt * sh + yy) * sw + xs) * cin;
              T* gw = grad.weight.ptr() + ((kt * 3 + ky) * 3 + kx) * cin * cout;
              for (std::size_t i = 0; i < cin; ++i) {
                const T a = in[i];
                T* gr = gw + i * cout;
                for (std::size_t c = 0; c < cout; ++c) gr[c] += a * dz[c];
              }
            }
          }
        }
      }
}

/// Per-scale frame embeddings X, shape [N, d_e].
template <typename T>
struct EmbeddingSequence {
  Tensor<T> values;
  int scale{1};
};

/// Global max over the spatial grid: out[t, c] = max_{y,x} x[t, y, x, c].
/// `argmax` (optional) receives the flat grid cell chosen for each (t, c);
/// ties resolve to the first cell in row-major order.
template <typename T>
Tensor<T> spatial_maxpool(const Tensor<T>& x, std::vector<std::uint32_t>* argmax = nullptr) {
  if (x.rank() != 4 || x.dim(1) < 1 || x.dim(2) < 1)
    throw ShapeError("spatial_maxpool: input must be [N, S1, S2, d] with S1, S2 >= 1");
  const std::size_t n = x.dim(0), cells = x.dim(1) * x.dim(2), c = x.dim(3);
  Tensor<T> out({n, c});
  if (argmax) argmax->assign(n * c, 0);
  for (std::size_t t = 0; t < n; ++t) {
    const T* base = x.ptr() + t * cells * c;
    T* o = out.ptr() + t * c;
    for (std::size_t ch = 0; ch < c; ++ch) o[ch] = base[ch];
    for (std::size_t cell = 1; cell < cells; ++cell)
      for (std::size_t ch = 0; ch < c; ++ch)
        if (base[cell * c + ch] > o[ch]) {
          o[ch] = base[cell * c + ch];
          if (argmax) (*argmax)[t * c + ch] = static_cast<std::uint32_t>(cell);
        }
  }
  return out;
}

template <typename T>
Tensor<T> spatial_maxpool_backward(const Shape& input_shape,
                                   const std::vector<std::uint32_t>& argmax,
                                   const Tensor<T>& d_out) {
  Tensor<T> d_in(input_shape);
  const std::size_t n = input_shape[0], cells = input_shape[1] * input_shape[2], c = input_shape[3];
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t ch = 0; ch < c; ++ch)
      d_in[(t * cells + argmax[t * c + ch]) * c + ch] += d_out[t * c + ch];
  return d_in;
}

/// provide_features -> temporal_context -> spatial_maxpool for one scale.
template <typename T>
EmbeddingSequence<T> encode_scale(const ClipSet& clips, const SampledIndexMap& map,
                                  const FeatureProvider& provider, const EncoderParams<T>& params) {
  const GridDims expected = provider.dims();
  if (params.weight.rank() != 5 || static_cast<int>(params.weight.dim(3)) != expected.channels)
    throw ShapeError("encode_scale: kernel input channels do not match provider channels");
  const Tensor<T> features = provide_features<T>(clips, map, provider, expected);
  return {spatial_maxpool(temporal_context(features, params)), clips.scale};
}

}  // namespace transrac
