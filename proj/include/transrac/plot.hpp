#pragma once

// Density-map visualization: a CSV of values and a binary PGM strip.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "transrac/error.hpp"
#include "transrac/racf.hpp"

namespace transrac {

/// Scales one row to 0..255 by its own min and max; a flat row is black.
inline std::vector<unsigned char> to_gray_row(const std::vector<double>& values) {
  std::vector<unsigned char> out(values.size(), 0);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (!(range > 0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = static_cast<unsigned char>(std::lround(255.0 * (values[i] - *lo) / range));
  return out;
}

/// Binary P5 image with one row per map.
inline std::string encode_pgm(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ValidationError("plot: no rows");
  const std::size_t width = rows.front().size();
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(rows.size()) + "\n255\n";
  for (const auto& r : rows) {
    if (r.size() != width) throw ValidationError("plot: rows differ in length");
    const auto g = to_gray_row(r);
    out.append(g.begin(), g.end());
  }
  return out;
}

inline std::string encode_plot_csv(const std::vector<double>& pred,
                                   const std::optional<std::vector<double>>& target) {
  std::ostringstream os;
  os.precision(17);
  os << (target ? "frame,pred,target\n" : "frame,pred\n");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    os << i << ',' << pred[i];
    if (target) os << ',' << (*target)[i];
    os << '\n';
  }
  return os.str();
}

/// Writes `<prefix>.csv` and `<prefix>.pgm` (row 1 prediction, row 2 target).
inline void emit_plot(const std::vector<double>& pred,
                      const std::optional<std::vector<double>>& target,
                      const std::filesystem::path& prefix) {
  if (target && target->size() != pred.size())
    throw ValidationError("plot: prediction and target lengths differ");
  std::vector<std::vector<double>> rows{pred};
  if (target) rows.push_back(*target);
  auto with_ext = [&](const char* ext) {
    auto p = prefix;
    p += ext;
    return p;
  };
  io::write_file(with_ext(".csv"), encode_plot_csv(pred, target));
  io::write_file(with_ext(".pgm"), encode_pgm(rows));
}

}  // namespace transrac
