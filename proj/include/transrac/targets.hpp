#pragma once

// Gaussian density-map targets built from cycle spans.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "transrac/data.hpp"
#include "transrac/error.hpp"
#include "transrac/tensor.hpp"

namespace transrac {

enum class TargetVariant { begin, mid, end, merge };

inline std::string to_string(TargetVariant v) {
  switch (v) {
    case TargetVariant::begin: return "begin";
    case TargetVariant::mid: return "mid";
    case TargetVariant::end: return "end";
    case TargetVariant::merge: return "merge";
  }
  return "?";
}

inline TargetVariant parse_target_variant(const std::string& s) {
  if (s == "begin") return TargetVariant::begin;
  if (s == "mid") return TargetVariant::mid;
  if (s == "end") return TargetVariant::end;
  if (s == "merge") return TargetVariant::merge;
  throw ValidationError("unknown target variant '" + s + "'");
}

inline constexpr double kDefaultSigmaFloor = 0.1;

namespace detail {

// Upper tail Q(x) = 1 - Phi(x) through erfc, which keeps full relative
// precision far into the tail (std::erfc is accurate to a few ulp).
inline double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

}  // namespace detail

/// Mass of N(mu, sigma^2) on the unit bin centred at k:
/// Phi((k + 0.5 - mu) / sigma) - Phi((k - 0.5 - mu) / sigma).
inline double gaussian_bin_mass(double mu, double sigma, double k) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian_bin_mass: sigma must be > 0");
  const double lo = (k - 0.5 - mu) / sigma;
  const double hi = (k + 0.5 - mu) / sigma;
  if (lo >= 0.0) return detail::normal_upper_tail(lo) - detail::normal_upper_tail(hi);
  if (hi <= 0.0) return detail::normal_upper_tail(-hi) - detail::normal_upper_tail(-lo);
  return 1.0 - detail::normal_upper_tail(hi) - detail::normal_upper_tail(-lo);
}

namespace detail {

inline void add_span(std::vector<double>& map, double mu, double sigma, double weight) {
  const std::size_t n = map.size();
  std::vector<double> raw(n);
  double total = 0;
  for (std::size_t k = 0; k < n; ++k) {
    raw[k] = gaussian_bin_mass(mu, sigma, static_cast<double>(k));
    total += raw[k];
  }
  for (std::size_t k = 0; k < n; ++k) map[k] += weight * raw[k] / total;
}

}  // namespace detail

/// Density target over N sampled frames. Each span (s, e) contributes unit
/// mass: sigma = max((e - s) / 6, sigma_floor), mu at s / (s + e) / 2 / e for
/// begin / mid / end, binned and renormalized over [0, N). `merge` is the mean
/// of the three.
inline Tensor<double> make_density_target(const std::vector<CycleSpan>& spans, int n,
                                          TargetVariant variant,
                                          double sigma_floor = kDefaultSigmaFloor) {
  if (n < 1) throw ValidationError("make_density_target: N must be >= 1");
  if (!(sigma_floor > 0.0)) throw ValidationError("make_density_target: sigma_floor must be > 0");
  std::vector<double> map(static_cast<std::size_t>(n), 0.0);
  for (const auto& span : spans) {
    if (span.start_frame < 0 || span.end_frame < span.start_frame || span.end_frame >= n)
      throw ValidationError("make_density_target: span (" + std::to_string(span.start_frame) +
                            ", " + std::to_string(span.end_frame) + ") outside [0, " +
                            std::to_string(n) + ")");
    const double s = span.start_frame, e = span.end_frame;
    const double sigma = std::max((e - s) / 6.0, sigma_floor);
    switch (variant) {
      case TargetVariant::begin: detail::add_span(map, s, sigma, 1.0); break;
      case TargetVariant::mid: detail::add_span(map, 0.5 * (s + e), sigma, 1.0); break;
      case TargetVariant::end: detail::add_span(map, e, sigma, 1.0); break;
      case TargetVariant::merge:
        detail::add_span(map, s, sigma, 1.0 / 3.0);
        detail::add_span(map, 0.5 * (s + e), sigma, 1.0 / 3.0);
        detail::add_span(map, e, sigma, 1.0 / 3.0);
        break;
    }
  }
  return Tensor<double>({static_cast<std::size_t>(n)}, std::move(map));
}

}  // namespace transrac
