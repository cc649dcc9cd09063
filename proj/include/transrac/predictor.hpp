#pragma once

// Density-map period predictor:
//   fusion conv (3x3 over the N x N plane, ReLU)
//   -> per-frame token = flattened correlation row, linear to d_p, + positional encoding
//   -> pre-norm transformer encoder layer(s)
//   -> scalar head with ReLU.

#include <cmath>
#include <string>
#include <vector>

#include "transrac/error.hpp"
#include "transrac/tensor.hpp"

namespace transrac {

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
struct TransformerLayerParams {
  int heads{4};
  Tensor<T> ln1_gain, ln1_bias;
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;  // [d_p, d_p] / [d_p]
  Tensor<T> ln2_gain, ln2_bias;
  Tensor<T> ffn_w1, ffn_b1;  // [d_p, d_ff] / [d_ff]
  Tensor<T> ffn_w2, ffn_b2;  // [d_ff, d_p] / [d_p]

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".ln1.gain", ln1_gain);
    f(prefix + ".ln1.bias", ln1_bias);
    f(prefix + ".attn.wq", wq);
    f(prefix + ".attn.bq", bq);
    f(prefix + ".attn.wk", wk);
    f(prefix + ".attn.bk", bk);
    f(prefix + ".attn.wv", wv);
    f(prefix + ".attn.bv", bv);
    f(prefix + ".attn.wo", wo);
    f(prefix + ".attn.bo", bo);
    f(prefix + ".ln2.gain", ln2_gain);
    f(prefix + ".ln2.bias", ln2_bias);
    f(prefix + ".ffn.w1", ffn_w1);
    f(prefix + ".ffn.b1", ffn_b1);
    f(prefix + ".ffn.w2", ffn_w2);
    f(prefix + ".ffn.b2", ffn_b2);
  }
};

template <typename T>
struct PredictorParams {
  Tensor<T> fusion_weight;  // [3, 3, C_in, C_f]
  Tensor<T> fusion_bias;    // [C_f]
  Tensor<T> input_weight;   // [N * C_f, d_p]
  Tensor<T> input_bias;     // [d_p]
  Tensor<T> positional;     // [N, d_p], fixed (not trained)
  std::vector<TransformerLayerParams<T>> layers;
  Tensor<T> head_weight;  // [d_p, 1]
  Tensor<T> head_bias;    // [1]

  /// Trainable tensors only; the positional table is a fixed buffer.
  template <typename F>
  void visit(F&& f) {
    f("predictor.fusion.weight", fusion_weight);
    f("predictor.fusion.bias", fusion_bias);
    f("predictor.input.weight", input_weight);
    f("predictor.input.bias", input_bias);
    for (std::size_t l = 0; l < layers.size(); ++l)
      layers[l].visit("predictor.layer" + std::to_string(l), f);
    f("predictor.head.weight", head_weight);
    f("predictor.head.bias", head_bias);
  }
};

/// Fixed sinusoidal table: pe[p, 2i] = sin(p / 10000^(2i/d)), pe[p, 2i+1] = cos(...).
template <typename T>
Tensor<T> sinusoidal_positions(std::size_t n, std::size_t d) {
  Tensor<T> pe({n, d});
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
      const double angle = static_cast<double>(p) * freq;
      pe[p * d + i] = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  return pe;
}

namespace nn {

// y[n, out] = x[n, in] W[in, out] + b
template <typename T>
void linear(const T* x, const Tensor<T>& w, const Tensor<T>& b, T* y, std::size_t n) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < out; ++j) y[i * out + j] = b[j];
  linalg::matmul(x, w.ptr(), y, n, in, out, true);
}

// Accumulates dW, db; writes (or adds into) dx when given.
template <typename T>
void linear_backward(const T* x, const Tensor<T>& w, const T* dy, std::size_t n, Tensor<T>& dw,
                     Tensor<T>& db, T* dx, bool accumulate_dx = false) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  linalg::matmul_at_b(x, dy, dw.ptr(), n, in, out, true);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < out; ++j) db[j] += dy[i * out + j];
  if (dx) linalg::matmul_a_bt(dy, w.ptr(), dx, n, out, in, accumulate_dx);
}

template <typename T>
struct LayerNormCache {
  std::vector<T> xhat;  // [n, d]
  std::vector<T> rstd;  // [n]
};

template <typename T>
void layer_norm(const T* x, const Tensor<T>& gain, const Tensor<T>& bias, T* y, std::size_t n,
                LayerNormCache<T>& cache) {
  const std::size_t d = gain.size();
  cache.xhat.resize(n * d);
  cache.rstd.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = x + i * d;
    T mean{0};
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<T>(d);
    T var{0};
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<T>(d);
    const T rstd = T{1} / std::sqrt(var + static_cast<T>(kLayerNormEps));
    cache.rstd[i] = rstd;
    for (std::size_t j = 0; j < d; ++j) {
      const T xh = (row[j] - mean) * rstd;
      cache.xhat[i * d + j] = xh;
      y[i * d + j] = gain[j] * xh + bias[j];
    }
  }
}

// Adds dL/dx into dx.
template <typename T>
void layer_norm_backward(const T* dy, const Tensor<T>& gain, const LayerNormCache<T>& cache,
                         std::size_t n, T* dx, Tensor<T>& dgain, Tensor<T>& dbias) {
  const std::size_t d = gain.size();
  std::vector<T> dxhat(d);
  for (std::size_t i = 0; i < n; ++i) {
    const T* xh = cache.xhat.data() + i * d;
    const T* g = dy + i * d;
    T mean_d{0}, mean_dx{0};
    for (std::size_t j = 0; j < d; ++j) {
      dgain[j] += g[j] * xh[j];
      dbias[j] += g[j];
      dxhat[j] = g[j] * gain[j];
      mean_d += dxhat[j];
      mean_dx += dxhat[j] * xh[j];
    }
    mean_d /= static_cast<T>(d);
    mean_dx /= static_cast<T>(d);
    for (std::size_t j = 0; j < d; ++j)
      dx[i * d + j] += cache.rstd[i] * (dxhat[j] - mean_d - xh[j] * mean_dx);
  }
}

}  // namespace nn

template <typename T>
struct TransformerLayerCache {
  std::vector<T> x;  // layer input [N, d]
  nn::LayerNormCache<T> ln1, ln2;
  std::vector<T> z1, q, k, v, attn, o, h, z2, f1, r;
};

/// Fusion conv: out[i, j, :] = ReLU(b + sum_{ky,kx,c} C[i+ky-1, j+kx-1, c] W[ky, kx, c, :]).
template <typename T>
Tensor<T> fusion_conv(const Tensor<T>& c, const Tensor<T>& weight, const Tensor<T>& bias) {
  const std::size_t n = c.dim(0), m = c.dim(1), cin = c.dim(2), cout = weight.dim(3);
  Tensor<T> out({n, m, cout});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      T* o = out.ptr() + (i * m + j) * cout;
      for (std::size_t k = 0; k < cout; ++k) o[k] = bias[k];
      for (int ky = 0; ky < 3; ++ky) {
        const long ii = static_cast<long>(i) + ky - 1;
        if (ii < 0 || ii >= static_cast<long>(n)) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const long jj = static_cast<long>(j) + kx - 1;
          if (jj < 0 || jj >= static_cast<long>(m)) continue;
          const T* in = c.ptr() + (ii * m + jj) * cin;
          const T* w = weight.ptr() + (ky * 3 + kx) * cin * cout;
          for (std::size_t ch = 0; ch < cin; ++ch) {
            const T a = in[ch];
            const T* wr = w + ch * cout;
            for (std::size_t k = 0; k < cout; ++k) o[k] += a * wr[k];
          }
        }
      }
      for (std::size_t k = 0; k < cout; ++k) o[k] = o[k] > T{0} ? o[k] : T{0};
    }
  return out;
}

/// Returns dL/dC; accumulates weight and bias gradients.
template <typename T>
Tensor<T> fusion_conv_backward(const Tensor<T>& c, const Tensor<T>& weight, const Tensor<T>& out,
                               const Tensor<T>& d_out, Tensor<T>& d_weight, Tensor<T>& d_bias) {
  const std::size_t n = c.dim(0), m = c.dim(1), cin = c.dim(2), cout = weight.dim(3);
  Tensor<T> dc(c.shape);
  std::vector<T> dz(cout);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t base = (i * m + j) * cout;
      bool any = false;
      for (std::size_t k = 0; k < cout; ++k) {
        dz[k] = out[base + k] > T{0} ? d_out[base + k] : T{0};
        d_bias[k] += dz[k];
        any = any || dz[k] != T{0};
      }
      if (!any) continue;
      for (int ky = 0; ky < 3; ++ky) {
        const long ii = static_cast<long>(i) + ky - 1;
        if (ii < 0 || ii >= static_cast<long>(n)) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const long jj = static_cast<long>(j) + kx - 1;
          if (jj < 0 || jj >= static_cast<long>(m)) continue;
          const T* in = c.ptr() + (ii * m + jj) * cin;
          T* din = dc.ptr() + (ii * m + jj) * cin;
          const T* w = weight.ptr() + (ky * 3 + kx) * cin * cout;
          T* gw = d_weight.ptr() + (ky * 3 + kx) * cin * cout;
          for (std::size_t ch = 0; ch < cin; ++ch) {
            const T a = in[ch];
            const T* wr = w + ch * cout;
            T* gr = gw + ch * cout;
            T acc{0};
            for (std::size_t k = 0; k < cout; ++k) {
              gr[k] += a * dz[k];
              acc += wr[k] * dz[k];
            }
            din[ch] += acc;
          }
        }
      }
    }
  return dc;
}

/// One pre-norm encoder layer: h = x + MHA(LN1(x)); y = h + FFN(LN2(h)).
template <typename T>
Tensor<T> transformer_layer(const Tensor<T>& x, const TransformerLayerParams<T>& p,
                            TransformerLayerCache<T>* cache = nullptr) {
  const std::size_t n = x.dim(0), d = x.dim(1), dff = p.ffn_w1.dim(1);
  const std::size_t heads = static_cast<std::size_t>(p.heads), dk = d / heads;
  TransformerLayerCache<T> local;
  TransformerLayerCache<T>& c = cache ? *cache : local;
  c.x = x.data;
  c.z1.resize(n * d);
  c.q.resize(n * d);
  c.k.resize(n * d);
  c.v.resize(n * d);
  c.o.assign(n * d, T{0});
  c.attn.resize(heads * n * n);
  nn::layer_norm(x.ptr(), p.ln1_gain, p.ln1_bias, c.z1.data(), n, c.ln1);
  nn::linear(c.z1.data(), p.wq, p.bq, c.q.data(), n);
  nn::linear(c.z1.data(), p.wk, p.bk, c.k.data(), n);
  nn::linear(c.z1.data(), p.wv, p.bv, c.v.data(), n);

  const T scale = T{1} / std::sqrt(static_cast<T>(dk));
  for (std::size_t h = 0; h < heads; ++h) {
    T* a = c.attn.data() + h * n * n;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        T s{0};
        for (std::size_t e = 0; e < dk; ++e) s += c.q[i * d + h * dk + e] * c.k[j * d + h * dk + e];
        a[i * n + j] = s * scale;
      }
    linalg::softmax_rows(a, n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const T w = a[i * n + j];
        for (std::size_t e = 0; e < dk; ++e) c.o[i * d + h * dk + e] += w * c.v[j * d + h * dk + e];
      }
  }
  c.h.resize(n * d);
  nn::linear(c.o.data(), p.wo, p.bo, c.h.data(), n);
  for (std::size_t i = 0; i < n * d; ++i) c.h[i] += x[i];

  c.z2.resize(n * d);
  nn::layer_norm(c.h.data(), p.ln2_gain, p.ln2_bias, c.z2.data(), n, c.ln2);
  c.f1.resize(n * dff);
  c.r.resize(n * dff);
  nn::linear(c.z2.data(), p.ffn_w1, p.ffn_b1, c.f1.data(), n);
  for (std::size_t i = 0; i < n * dff; ++i) c.r[i] = c.f1[i] > T{0} ? c.f1[i] : T{0};
  Tensor<T> y({n, d});
  nn::linear(c.r.data(), p.ffn_w2, p.ffn_b2, y.ptr(), n);
  for (std::size_t i = 0; i < n * d; ++i) y[i] += c.h[i];
  return y;
}

/// Returns dL/dx; accumulates parameter gradients into `g`.
template <typename T>
Tensor<T> transformer_layer_backward(const TransformerLayerParams<T>& p,
                                     const TransformerLayerCache<T>& c, const Tensor<T>& dy,
                                     TransformerLayerParams<T>& g) {
  const std::size_t n = dy.dim(0), d = dy.dim(1), dff = p.ffn_w1.dim(1);
  const std::size_t heads = static_cast<std::size_t>(p.heads), dk = d / heads;

  std::vector<T> dh(dy.data);
  std::vector<T> dr(n * dff);
  nn::linear_backward(c.r.data(), p.ffn_w2, dy.ptr(), n, g.ffn_w2, g.ffn_b2, dr.data());
  for (std::size_t i = 0; i < n * dff; ++i) dr[i] = c.f1[i] > T{0} ? dr[i] : T{0};
  std::vector<T> dz2(n * d);
  nn::linear_backward(c.z2.data(), p.ffn_w1, dr.data(), n, g.ffn_w1, g.ffn_b1, dz2.data());
  nn::layer_norm_backward(dz2.data(), p.ln2_gain, c.ln2, n, dh.data(), g.ln2_gain, g.ln2_bias);

  Tensor<T> dx({n, d}, dh);
  std::vector<T> d_o(n * d);
  nn::linear_backward(c.o.data(), p.wo, dh.data(), n, g.wo, g.bo, d_o.data());

  std::vector<T> dq(n * d, T{0}), dkk(n * d, T{0}), dv(n * d, T{0});
  std::vector<T> da(n * n), ds(n * n);
  const T scale = T{1} / std::sqrt(static_cast<T>(dk));
  for (std::size_t h = 0; h < heads; ++h) {
    const T* a = c.attn.data() + h * n * n;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        T s{0};
        for (std::size_t e = 0; e < dk; ++e) s += d_o[i * d + h * dk + e] * c.v[j * d + h * dk + e];
        da[i * n + j] = s;
        const T w = a[i * n + j];
        for (std::size_t e = 0; e < dk; ++e) dv[j * d + h * dk + e] += w * d_o[i * d + h * dk + e];
      }
    linalg::softmax_rows_backward(a, da.data(), ds.data(), n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const T s = ds[i * n + j] * scale;
        if (s == T{0}) continue;
        for (std::size_t e = 0; e < dk; ++e) {
          dq[i * d + h * dk + e] += s * c.k[j * d + h * dk + e];
          dkk[j * d + h * dk + e] += s * c.q[i * d + h * dk + e];
        }
      }
  }
  std::vector<T> dz1(n * d);
  nn::linear_backward(c.z1.data(), p.wq, dq.data(), n, g.wq, g.bq, dz1.data());
  nn::linear_backward(c.z1.data(), p.wk, dkk.data(), n, g.wk, g.bk, dz1.data(), true);
  nn::linear_backward(c.z1.data(), p.wv, dv.data(), n, g.wv, g.bv, dz1.data(), true);
  nn::layer_norm_backward(dz1.data(), p.ln1_gain, c.ln1, n, dx.ptr(), g.ln1_gain, g.ln1_bias);
  return dx;
}

template <typename T>
struct PredictorCache {
  Tensor<T> input;   // fused correlation [N, N, C_in]
  Tensor<T> fused;   // post-ReLU fusion conv [N, N, C_f]
  std::vector<TransformerLayerCache<T>> layers;
  Tensor<T> final_tokens;  // [N, d_p]
  std::vector<T> head_pre;  // [N]
};

/// Token stages only: transformer layers then the ReLU head. `tokens` already
/// include the positional encoding.
template <typename T>
Tensor<T> predict_from_tokens(const Tensor<T>& tokens, const PredictorParams<T>& p,
                              PredictorCache<T>* cache = nullptr) {
  Tensor<T> x = tokens;
  if (cache) cache->layers.resize(p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    x = transformer_layer(x, p.layers[l], cache ? &cache->layers[l] : nullptr);
  const std::size_t n = x.dim(0), d = x.dim(1);
  Tensor<T> density({n});
  std::vector<T> pre(n);
  for (std::size_t i = 0; i < n; ++i) {
    T s = p.head_bias[0];
    for (std::size_t j = 0; j < d; ++j) s += x[i * d + j] * p.head_weight[j];
    pre[i] = s;
    density[i] = s > T{0} ? s : T{0};
  }
  if (cache) {
    cache->final_tokens = std::move(x);
    cache->head_pre = std::move(pre);
  }
  return density;
}

/// Maps a fused correlation tensor [N, N, C_in] to a length-N density map.
template <typename T>
Tensor<T> predict_density(const Tensor<T>& c, const PredictorParams<T>& p,
                          PredictorCache<T>* cache = nullptr) {
  if (c.rank() != 3 || c.dim(0) != c.dim(1))
    throw ShapeError("predict_density: input must be [N, N, C], got " + shape_string(c.shape));
  const std::size_t n = c.dim(0);
  if (p.fusion_weight.rank() != 4 || p.fusion_weight.dim(2) != c.dim(2))
    throw ShapeError("predict_density: fusion kernel " + shape_string(p.fusion_weight.shape) +
                     " does not accept " + std::to_string(c.dim(2)) + " channels");
  const std::size_t cf = p.fusion_weight.dim(3);
  if (p.input_weight.dim(0) != n * cf)
    throw ShapeError("predict_density: input projection expects N = " +
                     std::to_string(p.input_weight.dim(0) / cf) + ", got " + std::to_string(n));
  const std::size_t dp = p.input_weight.dim(1);

  Tensor<T> fused = fusion_conv(c, p.fusion_weight, p.fusion_bias);
  Tensor<T> tokens({n, dp});
  nn::linear(fused.ptr(), p.input_weight, p.input_bias, tokens.ptr(), n);
  if (p.positional.size() == n * dp)
    for (std::size_t i = 0; i < n * dp; ++i) tokens[i] += p.positional[i];
  if (cache) {
    cache->input = c;
    cache->fused = std::move(fused);
  }
  return predict_from_tokens(tokens, p, cache);
}

/// Returns dL/dC; accumulates trainable parameter gradients into `g`.
template <typename T>
Tensor<T> predict_density_backward(const PredictorParams<T>& p, const PredictorCache<T>& cache,
                                   const Tensor<T>& d_density, PredictorParams<T>& g) {
  const std::size_t n = cache.final_tokens.dim(0), d = cache.final_tokens.dim(1);
  Tensor<T> dx({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const T dpre = cache.head_pre[i] > T{0} ? d_density[i] : T{0};
    if (dpre == T{0}) continue;
    g.head_bias[0] += dpre;
    for (std::size_t j = 0; j < d; ++j) {
      g.head_weight[j] += cache.final_tokens[i * d + j] * dpre;
      dx[i * d + j] = p.head_weight[j] * dpre;
    }
  }
  for (std::size_t l = p.layers.size(); l-- > 0;)
    dx = transformer_layer_backward(p.layers[l], cache.layers[l], dx, g.layers[l]);

  Tensor<T> d_fused(cache.fused.shape);
  nn::linear_backward(cache.fused.ptr(), p.input_weight, dx.ptr(), n, g.input_weight, g.input_bias,
                      d_fused.ptr());
  return fusion_conv_backward(cache.input, p.fusion_weight, cache.fused, d_fused, g.fusion_weight,
                              g.fusion_bias);
}

/// Predicted count: the un-rounded sum of the density map.
template <typename T>
double count_from_density(const Tensor<T>& density) {
  double s = 0;
  for (T v : density.data) s += static_cast<double>(v);
  return s;
}

}  // namespace transrac
