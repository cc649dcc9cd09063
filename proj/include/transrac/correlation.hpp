#pragma once

// Temporal correlation between frame embeddings: scaled dot-product attention
// maps per head (no value path) or a softmax-normalized negative squared
// distance matrix, fused across scales along the channel axis.

#include <cmath>
#include <string>
#include <vector>

#include "transrac/error.hpp"
#include "transrac/tensor.hpp"

namespace transrac {

/// Query/key projections of one scale, each [H, d_e, d_h].
template <typename T>
struct AttentionHeads {
  Tensor<T> query;
  Tensor<T> key;
};

/// Intermediates kept for the backward pass; per head, row-major.
template <typename T>
struct AttentionCache {
  std::vector<T> q;     // [H, N, d_h]
  std::vector<T> k;     // [H, N, d_h]
  std::vector<T> attn;  // [H, N, N]
};

namespace detail {

// scores [N, N] -> row softmax, written into channel h of out [N, N, H].
template <typename T>
void attention_from_scores(std::vector<T>& scores, std::size_t n, Tensor<T>& out, std::size_t h) {
  for (T s : scores)
    if (!std::isfinite(static_cast<double>(s)))
      throw NumericError("attention_correlation: non-finite attention score");
  linalg::softmax_rows(scores.data(), n, n);
  const std::size_t channels = out.dim(2);
  for (std::size_t i = 0; i < n * n; ++i) out[i * channels + h] = scores[i];
}

}  // namespace detail

/// Per head h: Q = X Wq_h, K = X Wk_h, channel h = softmax_rows(Q K^T / sqrt(d_h)).
template <typename T>
Tensor<T> attention_correlation(const Tensor<T>& x, const AttentionHeads<T>& params,
                                AttentionCache<T>* cache = nullptr) {
  if (x.rank() != 2) throw ShapeError("attention_correlation: X must be [N, d_e]");
  const std::size_t n = x.dim(0), de = x.dim(1);
  if (params.query.rank() != 3 || params.query.dim(1) != de)
    throw ShapeError("attention_correlation: query projection " +
                     shape_string(params.query.shape) + " incompatible with X " +
                     shape_string(x.shape));
  const std::size_t heads = params.query.dim(0), dh = params.query.dim(2);
  require_shape(params.key.shape, params.query.shape, "attention_correlation key projection");

  Tensor<T> out({n, n, heads});
  std::vector<T> q(heads * n * dh), k(heads * n * dh), scores(n * n);
  std::vector<T> attn;
  if (cache) attn.resize(heads * n * n);
  const T scale = T{1} / std::sqrt(static_cast<T>(dh));
  for (std::size_t h = 0; h < heads; ++h) {
    T* qh = q.data() + h * n * dh;
    T* kh = k.data() + h * n * dh;
    linalg::matmul(x.ptr(), params.query.ptr() + h * de * dh, qh, n, de, dh);
    linalg::matmul(x.ptr(), params.key.ptr() + h * de * dh, kh, n, de, dh);
    linalg::matmul_a_bt(qh, kh, scores.data(), n, dh, n);
    for (auto& s : scores) s *= scale;
    detail::attention_from_scores(scores, n, out, h);
    if (cache) std::copy(scores.begin(), scores.end(), attn.begin() + h * n * n);
  }
  if (cache) *cache = {std::move(q), std::move(k), std::move(attn)};
  return out;
}

/// Returns dL/dX and accumulates projection gradients.
template <typename T>
Tensor<T> attention_correlation_backward(const Tensor<T>& x, const AttentionHeads<T>& params,
                                         const AttentionCache<T>& cache, const Tensor<T>& d_out,
                                         AttentionHeads<T>& grad) {
  const std::size_t n = x.dim(0), de = x.dim(1);
  const std::size_t heads = params.query.dim(0), dh = params.query.dim(2);
  const T scale = T{1} / std::sqrt(static_cast<T>(dh));
  Tensor<T> dx({n, de});
  std::vector<T> da(n * n), ds(n * n), dq(n * dh), dk(n * dh);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n * n; ++i) da[i] = d_out[i * heads + h];
    linalg::softmax_rows_backward(cache.attn.data() + h * n * n, da.data(), ds.data(), n, n);
    for (auto& v : ds) v *= scale;
    const T* qh = cache.q.data() + h * n * dh;
    const T* kh = cache.k.data() + h * n * dh;
    linalg::matmul(ds.data(), kh, dq.data(), n, n, dh);
    linalg::matmul_at_b(ds.data(), qh, dk.data(), n, n, dh);
    linalg::matmul_at_b(x.ptr(), dq.data(), grad.query.ptr() + h * de * dh, n, de, dh, true);
    linalg::matmul_at_b(x.ptr(), dk.data(), grad.key.ptr() + h * de * dh, n, de, dh, true);
    linalg::matmul_a_bt(dq.data(), params.query.ptr() + h * de * dh, dx.ptr(), n, dh, de, true);
    linalg::matmul_a_bt(dk.data(), params.key.ptr() + h * de * dh, dx.ptr(), n, dh, de, true);
  }
  return dx;
}

/// Raw similarity S[i, j] = -||x_i - x_j||^2 / sqrt(d_e), before normalization.
template <typename T>
Tensor<T> tsm_scores(const Tensor<T>& x) {
  if (x.rank() != 2) throw ShapeError("tsm: X must be [N, d_e]");
  const std::size_t n = x.dim(0), de = x.dim(1);
  const T scale = T{1} / std::sqrt(static_cast<T>(de));
  Tensor<T> s({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      T d2{0};
      for (std::size_t c = 0; c < de; ++c) {
        const T diff = x[i * de + c] - x[j * de + c];
        d2 += diff * diff;
      }
      s[i * n + j] = s[j * n + i] = -d2 * scale;
    }
  return s;
}

/// Single-channel [N, N, 1] row-softmax of tsm_scores.
template <typename T>
Tensor<T> tsm_correlation(const Tensor<T>& x) {
  Tensor<T> s = tsm_scores(x);
  const std::size_t n = x.dim(0);
  linalg::softmax_rows(s.ptr(), n, n);
  s.shape = {n, n, 1};
  return s;
}

template <typename T>
Tensor<T> tsm_correlation_backward(const Tensor<T>& x, const Tensor<T>& out,
                                   const Tensor<T>& d_out) {
  const std::size_t n = x.dim(0), de = x.dim(1);
  const T scale = T{1} / std::sqrt(static_cast<T>(de));
  std::vector<T> ds(n * n);
  linalg::softmax_rows_backward(out.ptr(), d_out.ptr(), ds.data(), n, n);
  Tensor<T> dx({n, de});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      // dS_ij/dx_i = -2 (x_i - x_j) * scale, dS_ij/dx_j = +2 (x_i - x_j) * scale
      const T g = T{2} * scale * ds[i * n + j];
      for (std::size_t c = 0; c < de; ++c) {
        const T diff = x[i * de + c] - x[j * de + c];
        dx[i * de + c] -= g * diff;
        dx[j * de + c] += g * diff;
      }
    }
  return dx;
}

/// Concatenates per-scale [N, N, H_s] tensors along channels, in input order.
template <typename T>
Tensor<T> fuse_scales(const std::vector<Tensor<T>>& per_scale) {
  if (per_scale.empty()) throw ShapeError("fuse_scales: no scales given");
  const std::size_t n = per_scale.front().dim(0);
  const std::size_t per = per_scale.front().dim(2);
  for (const auto& t : per_scale) {
    if (t.rank() != 3 || t.dim(0) != n || t.dim(1) != n || t.dim(2) != per)
      throw ShapeError("fuse_scales: shape mismatch, " + shape_string(t.shape) + " vs " +
                       shape_string(per_scale.front().shape));
  }
  const std::size_t total = per * per_scale.size();
  Tensor<T> out({n, n, total});
  for (std::size_t s = 0; s < per_scale.size(); ++s)
    for (std::size_t i = 0; i < n * n; ++i)
      for (std::size_t c = 0; c < per; ++c) out[i * total + s * per + c] = per_scale[s][i * per + c];
  return out;
}

/// Channels [first, first + count) of a [N, N, C] tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& fused, std::size_t first, std::size_t count) {
  const std::size_t n = fused.dim(0), total = fused.dim(2);
  if (first + count > total) throw ShapeError("slice_channels: range outside tensor");
  Tensor<T> out({n, fused.dim(1), count});
  for (std::size_t i = 0; i < n * fused.dim(1); ++i)
    for (std::size_t c = 0; c < count; ++c) out[i * count + c] = fused[i * total + first + c];
  return out;
}

}  // namespace transrac
