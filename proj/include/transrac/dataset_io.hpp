#pragma once

// On-disk dataset layout: <dir>/annotations.csv plus one <video_id>.racf per video.

#include <filesystem>
#include <string>
#include <vector>

#include "transrac/data.hpp"
#include "transrac/pipeline.hpp"
#include "transrac/racf.hpp"

namespace transrac {

inline constexpr const char* kAnnotationFile = "annotations.csv";

inline std::vector<VideoRecord> load_annotations(const std::filesystem::path& path) {
  return parse_annotations(io::read_file(path));
}

inline std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / (id + ".racf");
}

inline void write_dataset(const std::filesystem::path& dir, const std::vector<SynthVideo>& videos) {
  std::filesystem::create_directories(dir);
  std::vector<VideoRecord> records;
  for (const auto& v : videos) {
    write_racf(feature_path(dir, v.record.video_id), v.features);
    records.push_back(v.record);
  }
  io::write_file(dir / kAnnotationFile, serialize_annotations(records));
}

/// Reads annotations and features and builds examples for `cfg`.
template <typename T>
std::vector<Example<T>> load_examples(const std::filesystem::path& dir, const ModelConfig& cfg,
                                      TargetVariant variant, double sigma_floor) {
  std::vector<Example<T>> out;
  for (const auto& rec : load_annotations(dir / kAnnotationFile))
    out.push_back(make_example<T>(rec, read_racf(feature_path(dir, rec.video_id)), cfg, variant,
                                  sigma_floor));
  return out;
}

}  // namespace transrac
