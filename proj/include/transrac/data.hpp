#pragma once

// Annotation records, dataset statistics, train/val/test splits and the
// synthetic repetitive-feature generator.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "transrac/error.hpp"
#include "transrac/tensor.hpp"

namespace transrac {

/// One action cycle, inclusive frame bounds.
struct CycleSpan {
  int start_frame{0};
  int end_frame{0};

  int length() const noexcept { return end_frame - start_frame + 1; }
  friend bool operator==(const CycleSpan&, const CycleSpan&) = default;
};

struct VideoRecord {
  std::string video_id;
  std::string action_type;
  int frame_count{1};
  double fps{30.0};
  std::vector<CycleSpan> cycles;

  double duration_seconds() const { return frame_count / fps; }
  int count() const noexcept { return static_cast<int>(cycles.size()); }
  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

inline constexpr std::string_view kAnnotationHeader =
    "video_id,action_type,frame_count,fps,start_frame,end_frame";

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

template <typename Number>
Number parse_number(std::string_view field, const char* name, std::size_t line) {
  Number value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || field.empty())
    throw ParseError("invalid " + std::string(name) + " '" + std::string(field) + "'", line);
  return value;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Checks the span invariants of a record; throws ValidationError.
inline void validate_record(const VideoRecord& rec) {
  if (rec.video_id.empty()) throw ValidationError("empty video_id");
  if (rec.frame_count < 1)
    throw ValidationError(rec.video_id + ": frame_count must be >= 1");
  if (!(rec.fps > 0.0) || !std::isfinite(rec.fps))
    throw ValidationError(rec.video_id + ": fps must be positive");
  for (std::size_t i = 0; i < rec.cycles.size(); ++i) {
    const auto& c = rec.cycles[i];
    if (c.start_frame < 0 || c.end_frame < c.start_frame)
      throw ValidationError(rec.video_id + ": cycle end before start");
    if (c.end_frame >= rec.frame_count)
      throw ValidationError(rec.video_id + ": cycle frame " + std::to_string(c.end_frame) +
                            " outside frame_count " + std::to_string(rec.frame_count));
    if (i > 0 && rec.cycles[i - 1].start_frame > c.start_frame)
      throw ValidationError(rec.video_id + ": cycles not sorted");
  }
}

/// Parses the annotation CSV. Records are returned in order of first appearance.
inline std::vector<VideoRecord> parse_annotations(std::string_view text) {
  std::vector<VideoRecord> records;
  std::map<std::string, std::size_t, std::less<>> index;
  std::set<std::string, std::less<>> zero_cycle_ids;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_header = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!saw_header) {
      if (line != kAnnotationHeader)
        throw ParseError("expected header '" + std::string(kAnnotationHeader) + "'", line_no);
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;

    const auto fields = detail::split_fields(line);
    if (fields.size() != 6)
      throw ParseError("expected 6 fields, got " + std::to_string(fields.size()), line_no);
    if (fields[0].empty()) throw ParseError("empty video_id", line_no);

    VideoRecord row;
    row.video_id = std::string(fields[0]);
    row.action_type = std::string(fields[1]);
    row.frame_count = detail::parse_number<int>(fields[2], "frame_count", line_no);
    row.fps = detail::parse_number<double>(fields[3], "fps", line_no);

    const bool empty_start = fields[4].empty();
    const bool empty_end = fields[5].empty();
    if (empty_start != empty_end)
      throw ParseError("start_frame and end_frame must both be present or both empty", line_no);

    auto it = index.find(row.video_id);
    if (it == index.end()) {
      it = index.emplace(row.video_id, records.size()).first;
      records.push_back(row);
    } else {
      const auto& prev = records[it->second];
      if (prev.action_type != row.action_type || prev.frame_count != row.frame_count ||
          prev.fps != row.fps)
        throw ValidationError("line " + std::to_string(line_no) + ": metadata for '" +
                              row.video_id + "' differs from earlier rows");
    }
    VideoRecord& rec = records[it->second];

    if (empty_start) {
      if (!rec.cycles.empty() || zero_cycle_ids.contains(rec.video_id))
        throw ValidationError("line " + std::to_string(line_no) + ": '" + rec.video_id +
                              "' mixes an empty cycle row with other rows");
      zero_cycle_ids.insert(rec.video_id);
      continue;
    }
    if (zero_cycle_ids.contains(rec.video_id))
      throw ValidationError("line " + std::to_string(line_no) + ": '" + rec.video_id +
                            "' mixes an empty cycle row with other rows");
    CycleSpan span{detail::parse_number<int>(fields[4], "start_frame", line_no),
                   detail::parse_number<int>(fields[5], "end_frame", line_no)};
    if (span.start_frame < 0 || span.end_frame < span.start_frame)
      throw ValidationError("line " + std::to_string(line_no) + ": end_frame before start_frame");
    if (span.end_frame >= rec.frame_count)
      throw ValidationError("line " + std::to_string(line_no) + ": frame index " +
                            std::to_string(span.end_frame) + " >= frame_count " +
                            std::to_string(rec.frame_count));
    rec.cycles.push_back(span);
  }
  if (!saw_header) throw ParseError("missing header", 1);

  for (auto& rec : records) {
    std::stable_sort(rec.cycles.begin(), rec.cycles.end(),
                     [](const CycleSpan& a, const CycleSpan& b) {
                       return a.start_frame < b.start_frame;
                     });
    validate_record(rec);
  }
  return records;
}

inline std::string serialize_annotations(const std::vector<VideoRecord>& records) {
  std::ostringstream os;
  os << kAnnotationHeader << '\n';
  for (const auto& rec : records) {
    const std::string prefix = rec.video_id + ',' + rec.action_type + ',' +
                               std::to_string(rec.frame_count) + ',' +
                               detail::format_double(rec.fps) + ',';
    if (rec.cycles.empty()) {
      os << prefix << ",\n";
      continue;
    }
    for (const auto& c : rec.cycles) os << prefix << c.start_frame << ',' << c.end_frame << '\n';
  }
  return os.str();
}

struct DatasetStats {
  std::size_t num_videos{0};
  double duration_mean{0}, duration_std{0}, duration_min{0}, duration_max{0};
  double count_mean{0}, count_std{0};
  int count_min{0}, count_max{0};
};

/// Population statistics over durations (seconds) and cycle counts.
inline DatasetStats dataset_stats(const std::vector<VideoRecord>& records) {
  if (records.empty()) throw ValidationError("dataset_stats: empty record list");
  DatasetStats s;
  s.num_videos = records.size();
  const double n = static_cast<double>(records.size());
  double dsum = 0, csum = 0;
  s.duration_min = s.duration_max = records.front().duration_seconds();
  s.count_min = s.count_max = records.front().count();
  for (const auto& r : records) {
    const double d = r.duration_seconds();
    dsum += d;
    csum += r.count();
    s.duration_min = std::min(s.duration_min, d);
    s.duration_max = std::max(s.duration_max, d);
    s.count_min = std::min(s.count_min, r.count());
    s.count_max = std::max(s.count_max, r.count());
  }
  s.duration_mean = dsum / n;
  s.count_mean = csum / n;
  double dvar = 0, cvar = 0;
  for (const auto& r : records) {
    dvar += (r.duration_seconds() - s.duration_mean) * (r.duration_seconds() - s.duration_mean);
    cvar += (r.count() - s.count_mean) * (r.count() - s.count_mean);
  }
  s.duration_std = std::sqrt(dvar / n);
  s.count_std = std::sqrt(cvar / n);
  return s;
}

enum class SplitMode { regular, open_set };

struct Split {
  std::vector<std::string> train, val, test;
  SplitMode mode{SplitMode::regular};
};

struct SplitRatios {
  double train{0.6}, val{0.2}, test{0.2};
};

namespace detail {

// Fisher-Yates over a 64-bit Mersenne twister; stable across standard libraries.
template <typename Item>
void seeded_shuffle(std::vector<Item>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace detail

/// Partitions records into train/val/test.
///
/// Regular mode shuffles videos with `seed` and cuts at rounded ratio sizes.
/// Open-set mode assigns whole action types (largest first, ties by name) to
/// the partition with the largest remaining deficit, guaranteeing each
/// partition at least one type; the seed only orders ids inside a partition.
inline Split split_dataset(const std::vector<VideoRecord>& records, SplitMode mode,
                           std::uint64_t seed, SplitRatios ratios = {}) {
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw ValidationError("split ratios must sum to 1");
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0)
    throw ValidationError("split ratios must be nonnegative");

  Split split;
  split.mode = mode;
  const double n = static_cast<double>(records.size());

  if (mode == SplitMode::regular) {
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(r.video_id);
    detail::seeded_shuffle(ids, seed);
    const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * n));
    const auto n_val =
        std::min(ids.size() - n_train, static_cast<std::size_t>(std::llround(ratios.val * n)));
    split.train.assign(ids.begin(), ids.begin() + n_train);
    split.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    split.test.assign(ids.begin() + n_train + n_val, ids.end());
    return split;
  }

  std::map<std::string, std::vector<std::string>> by_type;
  for (const auto& r : records) by_type[r.action_type].push_back(r.video_id);
  if (by_type.size() < 3)
    throw ValidationError("open-set split needs at least 3 distinct action types, got " +
                          std::to_string(by_type.size()));

  std::vector<std::pair<std::string, std::size_t>> types;
  for (const auto& [type, ids] : by_type) types.emplace_back(type, ids.size());
  std::stable_sort(types.begin(), types.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  const double targets[3] = {ratios.train * n, ratios.val * n, ratios.test * n};
  double filled[3] = {0, 0, 0};
  std::size_t type_count[3] = {0, 0, 0};
  std::vector<std::string>* parts[3] = {&split.train, &split.val, &split.test};

  for (std::size_t t = 0; t < types.size(); ++t) {
    const std::size_t remaining = types.size() - t;
    std::size_t empty_parts = 0;
    for (std::size_t p = 0; p < 3; ++p) empty_parts += type_count[p] == 0;

    std::size_t best = 0;
    double best_deficit = -1e300;
    for (std::size_t p = 0; p < 3; ++p) {
      if (remaining <= empty_parts && type_count[p] != 0) continue;
      const double deficit = targets[p] - filled[p];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = p;
      }
    }
    filled[best] += static_cast<double>(types[t].second);
    ++type_count[best];
    const auto& ids = by_type[types[t].first];
    parts[best]->insert(parts[best]->end(), ids.begin(), ids.end());
  }
  for (std::size_t p = 0; p < 3; ++p) detail::seeded_shuffle(*parts[p], seed + p);
  return split;
}

/// Parameters of one synthetic feature sequence.
struct SynthSpec {
  int num_frames{64};
  int cycle_length_min{4};
  int cycle_length_max{12};
  int num_cycles{5};
  /// (start_frame, length) ranges during which no cycle may run.
  std::vector<std::pair<int, int>> interruption_segments;
  double jitter{0.0};
  double noise_sigma{0.05};
  int feature_dim{16};
  int grid_h{2};
  int grid_w{2};
};

struct SynthSequence {
  /// [num_frames, grid_h, grid_w, feature_dim]
  Tensor<float> features;
  std::vector<CycleSpan> cycles;
};

inline void validate_synth_spec(const SynthSpec& s) {
  if (s.num_frames < 1) throw ValidationError("synth: num_frames must be >= 1");
  if (s.cycle_length_min < 2) throw ValidationError("synth: min cycle length must be >= 2");
  if (s.cycle_length_max < s.cycle_length_min)
    throw ValidationError("synth: cycle_length_max < cycle_length_min");
  if (s.num_cycles < 0) throw ValidationError("synth: num_cycles must be >= 0");
  if (s.jitter < 0 || s.noise_sigma < 0) throw ValidationError("synth: negative jitter or noise");
  if (s.feature_dim < 1 || s.grid_h < 1 || s.grid_w < 1)
    throw ValidationError("synth: feature dimensions must be positive");
  long long occupied = static_cast<long long>(s.num_cycles) * s.cycle_length_min;
  for (const auto& [start, len] : s.interruption_segments) {
    if (start < 0 || len < 1 || start + len > s.num_frames)
      throw ValidationError("synth: interruption segment outside the sequence");
    occupied += len;
  }
  if (occupied > s.num_frames)
    throw ValidationError("synth: cycles plus interruptions exceed num_frames");
}

/// Generates a feature sequence with known cycle spans.
///
/// Every (cell, channel) gets a base value, an amplitude and a phase offset.
/// Inside a cycle of length L starting at s, frame t carries
/// base + amp * sin(2*pi*(t - s)/L + phase); elsewhere only the base. Gaussian
/// noise of `noise_sigma` is added everywhere. Cycle lengths are
/// round(base_len * (1 + jitter * u)), u ~ U[-1, 1], clamped to the range, and
/// cycles are packed left to right, jumping over interruption segments.
inline SynthSequence generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  validate_synth_spec(spec);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double base_len =
      spec.cycle_length_min + unit(rng) * (spec.cycle_length_max - spec.cycle_length_min);
  std::vector<int> lengths;
  for (int i = 0; i < spec.num_cycles; ++i) {
    const double u = 2.0 * unit(rng) - 1.0;
    const long len = std::lround(base_len * (1.0 + spec.jitter * u));
    lengths.push_back(static_cast<int>(
        std::clamp<long>(len, spec.cycle_length_min, spec.cycle_length_max)));
  }

  SynthSequence out;
  int cursor = 0;
  for (int len : lengths) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (const auto& [start, ilen] : spec.interruption_segments) {
        if (start < cursor + len && start + ilen > cursor) {
          cursor = start + ilen;
          moved = true;
        }
      }
    }
    if (cursor + len > spec.num_frames)
      throw ValidationError("synth: infeasible packing, cycles do not fit in num_frames");
    out.cycles.push_back({cursor, cursor + len - 1});
    cursor += len;
  }

  const std::size_t cells = static_cast<std::size_t>(spec.grid_h) * spec.grid_w * spec.feature_dim;
  std::vector<double> base(cells), amp(cells), phase(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    base[i] = 0.5 * gauss(rng);
    amp[i] = 0.5 + unit(rng);
    phase[i] = 2.0 * std::numbers::pi * unit(rng);
  }

  out.features = Tensor<float>({static_cast<std::size_t>(spec.num_frames),
                                static_cast<std::size_t>(spec.grid_h),
                                static_cast<std::size_t>(spec.grid_w),
                                static_cast<std::size_t>(spec.feature_dim)});
  std::size_t next_cycle = 0;
  for (int t = 0; t < spec.num_frames; ++t) {
    while (next_cycle < out.cycles.size() && out.cycles[next_cycle].end_frame < t) ++next_cycle;
    const bool in_cycle =
        next_cycle < out.cycles.size() && out.cycles[next_cycle].start_frame <= t;
    double angle = 0.0;
    if (in_cycle) {
      const auto& c = out.cycles[next_cycle];
      angle = 2.0 * std::numbers::pi * (t - c.start_frame) / c.length();
    }
    float* frame = out.features.ptr() + static_cast<std::size_t>(t) * cells;
    for (std::size_t i = 0; i < cells; ++i) {
      double v = base[i];
      if (in_cycle) v += amp[i] * std::sin(angle + phase[i]);
      v += spec.noise_sigma * gauss(rng);
      frame[i] = static_cast<float>(v);
    }
  }
  return out;
}

/// Parameters for a whole synthetic dataset (the `synth` CLI input).
struct SynthSetSpec {
  int num_videos{32};
  int num_cycles_min{5};
  int num_cycles_max{12};
  int cycle_length_min{6};
  int cycle_length_max{20};
  double jitter{0.3};
  double noise_sigma{0.05};
  int max_interruptions{2};
  int interruption_length_min{4};
  int interruption_length_max{16};
  int feature_dim{16};
  int grid_h{2};
  int grid_w{2};
  double fps{30.0};
  std::vector<std::string> action_types{"synthetic"};
  std::string id_prefix{"syn"};
};

struct SynthVideo {
  VideoRecord record;
  Tensor<float> features;
};

/// Draws `num_videos` sequences. Each video gets its own generator seed derived
/// from (seed, index); the trailing idle stretch after the last cycle is cut to
/// at most one maximal cycle length.
inline std::vector<SynthVideo> generate_synthetic_set(const SynthSetSpec& set, std::uint64_t seed) {
  if (set.num_videos < 0) throw ValidationError("synth: num_videos must be >= 0");
  if (set.num_cycles_max < set.num_cycles_min || set.num_cycles_min < 0)
    throw ValidationError("synth: invalid num_cycles range");
  if (set.interruption_length_max < set.interruption_length_min ||
      set.interruption_length_min < 1)
    throw ValidationError("synth: invalid interruption length range");
  if (set.action_types.empty()) throw ValidationError("synth: action_types must be nonempty");

  std::vector<SynthVideo> videos;
  std::mt19937_64 meta(seed ^ 0x9E3779B97F4A7C15ULL);
  for (int v = 0; v < set.num_videos; ++v) {
    auto draw = [&](int lo, int hi) { return lo + static_cast<int>(meta() % (hi - lo + 1)); };
    SynthSpec spec;
    spec.cycle_length_min = set.cycle_length_min;
    spec.cycle_length_max = set.cycle_length_max;
    spec.jitter = set.jitter;
    spec.noise_sigma = set.noise_sigma;
    spec.feature_dim = set.feature_dim;
    spec.grid_h = set.grid_h;
    spec.grid_w = set.grid_w;
    spec.num_cycles = draw(set.num_cycles_min, set.num_cycles_max);
    const int n_int = set.max_interruptions > 0 ? draw(0, set.max_interruptions) : 0;

    std::vector<int> int_lengths;
    int int_total = 0;
    for (int i = 0; i < n_int; ++i) {
      int_lengths.push_back(draw(set.interruption_length_min, set.interruption_length_max));
      int_total += int_lengths.back();
    }
    // Each interruption can waste at most one cycle length of packing space.
    const int active = spec.num_cycles * set.cycle_length_max + n_int * set.cycle_length_max;
    spec.num_frames = std::max(1, active + int_total);
    // Disjoint interruption starts inside the active region.
    int free_space = spec.num_frames - int_total;
    std::vector<int> offsets;
    for (int i = 0; i < n_int; ++i) offsets.push_back(draw(0, std::max(0, free_space / 2)));
    std::sort(offsets.begin(), offsets.end());
    int shift = 0;
    for (int i = 0; i < n_int; ++i) {
      spec.interruption_segments.emplace_back(offsets[i] + shift, int_lengths[i]);
      shift += int_lengths[i];
    }

    const std::uint64_t video_seed = seed * 1000003ULL + static_cast<std::uint64_t>(v) + 1;
    SynthSequence seq = generate_synthetic(spec, video_seed);

    int last = seq.cycles.empty() ? 0 : seq.cycles.back().end_frame + 1;
    for (const auto& [start, len] : spec.interruption_segments)
      if (start < last) last = std::max(last, start + len);
    const int tail = draw(0, set.cycle_length_max);
    const int frames = std::clamp(last + tail, 1, spec.num_frames);

    SynthVideo out;
    out.record.video_id = set.id_prefix + "_" + std::to_string(v);
    out.record.action_type = set.action_types[static_cast<std::size_t>(v) % set.action_types.size()];
    out.record.frame_count = frames;
    out.record.fps = set.fps;
    out.record.cycles = seq.cycles;
    const std::size_t frame_size = seq.features.size() / seq.features.dim(0);
    Shape shape = seq.features.shape;
    shape[0] = static_cast<std::size_t>(frames);
    out.features = Tensor<float>(
        shape, std::vector<float>(seq.features.data.begin(),
                                  seq.features.data.begin() + frames * frame_size));
    videos.push_back(std::move(out));
  }
  return videos;
}

}  // namespace transrac
