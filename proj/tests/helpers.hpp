#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "transrac/transrac.hpp"

namespace testutil {

inline transrac::Tensor<double> random_tensor(const transrac::Shape& shape, std::uint64_t seed,
                                              double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  transrac::Tensor<double> t(shape);
  for (auto& v : t.data) v = u(rng);
  return t;
}

// Standard normal CDF by composite Simpson integration of the density from
// -12 (mass below is < 1e-32).
inline double phi_quadrature(double x) {
  const double a = -12.0;
  if (x <= a) return 0.0;
  const int n = 20000;
  const double h = (x - a) / n;
  auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * 3.14159265358979323846); };
  double s = pdf(a) + pdf(x);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(a + i * h);
  return s * h / 3.0;
}

inline std::vector<transrac::CycleSpan> random_spans(std::mt19937_64& rng, int n, int max_spans) {
  std::uniform_int_distribution<int> count(0, max_spans);
  std::uniform_int_distribution<int> pos(0, n - 1);
  std::vector<transrac::CycleSpan> spans;
  const int k = count(rng);
  for (int i = 0; i < k; ++i) {
    int a = pos(rng), b = pos(rng);
    if (a > b) std::swap(a, b);
    spans.push_back({a, b});
  }
  std::sort(spans.begin(), spans.end(),
            [](const auto& x, const auto& y) { return x.start_frame < y.start_frame; });
  return spans;
}

}  // namespace testutil
