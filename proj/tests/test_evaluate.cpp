#include <gtest/gtest.h>

#include <filesystem>

#include "helpers.hpp"

using namespace transrac;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(TRANSRAC_TEST_TMP) / "eval";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<SynthVideo> small_set(int n, std::uint64_t seed) {
  SynthSetSpec s;
  s.num_videos = n;
  s.num_cycles_min = 2;
  s.num_cycles_max = 5;
  s.feature_dim = 8;
  return generate_synthetic_set(s, seed);
}

ModelConfig eval_config() {
  auto c = ModelConfig::gradcheck();
  c.frames = 16;
  return c;
}

FeatureLoader memory_loader(const std::vector<SynthVideo>& vids) {
  return [&vids](const VideoRecord& r) {
    for (const auto& v : vids)
      if (v.record.video_id == r.video_id) return v.features;
    throw std::runtime_error("no features for " + r.video_id);
  };
}

std::vector<VideoRecord> records_of(const std::vector<SynthVideo>& vids) {
  std::vector<VideoRecord> out;
  for (const auto& v : vids) out.push_back(v.record);
  return out;
}

}  // namespace

TEST(Metrics, Examples) {
  EXPECT_EQ(obo({3, 4}, {3, 4}), 1.0);
  EXPECT_EQ(mae({3, 4}, {3, 4}), 0.0);
  EXPECT_EQ(obo({11.0, 8.0}, {10, 4}), 0.5);
  EXPECT_DOUBLE_EQ(mae({11, 8}, {10, 4}), 0.55);
  EXPECT_EQ(obo({6.0}, {5}), 1.0);
  EXPECT_EQ(obo({6.0000001}, {5}), 0.0);
  EXPECT_EQ(obo({4.0}, {5}), 1.0);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(obo({}, {}), ValidationError);
  EXPECT_THROW(obo({1}, {1, 2}), ValidationError);
  EXPECT_THROW(mae({1, 2}, {1}), ValidationError);
  EXPECT_THROW(mae({1}, {0}), ValidationError);
  EXPECT_THROW(obo({1}, {-1}), ValidationError);
}

TEST(Metrics, SkipZeroPolicy) {
  const auto m = mae_skip_zero({1.0, 11.0, 0.4}, {0, 10, 0});
  EXPECT_DOUBLE_EQ(m.value, 0.1);
  EXPECT_EQ(m.excluded, (std::vector<std::size_t>{0, 2}));
}

TEST(Metrics, RangeAndPermutationInvariance) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> pred(0, 20);
  std::uniform_int_distribution<int> gt(1, 15);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(9), g(9);
    for (int i = 0; i < 9; ++i) {
      p[i] = pred(rng);
      g[i] = gt(rng);
    }
    const double o = obo(p, g), m = mae(p, g);
    EXPECT_GE(o, 0.0);
    EXPECT_LE(o, 1.0);
    EXPECT_GE(m, 0.0);
    std::vector<std::size_t> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pp, gp;
    for (auto i : perm) {
      pp.push_back(p[i]);
      gp.push_back(g[i]);
    }
    EXPECT_EQ(obo(pp, gp), o);
    EXPECT_NEAR(mae(pp, gp), m, 1e-15);
  }
}

TEST(Evaluate, ZeroModelGivesMaeOneOboZero) {
  const auto vids = small_set(6, 1);
  const auto m = zero_model<double>(eval_config());
  const auto r = evaluate(m, records_of(vids), memory_loader(vids));
  ASSERT_TRUE(r.failures.empty());
  ASSERT_EQ(r.rows.size(), 6u);
  EXPECT_EQ(r.mae, 1.0);
  EXPECT_EQ(r.obo, 0.0);
}

TEST(Evaluate, TargetOracleModel) {
  // Rows whose prediction is the sum of the target map itself.
  const auto vids = small_set(5, 2);
  EvalResult r;
  for (const auto& v : vids) {
    const auto ex = make_example<double>(v.record, v.features, eval_config(), TargetVariant::mid);
    const double pred = count_from_density(ex.target);
    r.rows.push_back({v.record.video_id, ex.count, pred, std::abs(ex.count - pred), false});
  }
  summarize(r);
  EXPECT_NEAR(r.mae, 0.0, 1e-6);
  EXPECT_EQ(r.obo, 1.0);
}

TEST(Evaluate, RowsAreSortedAndConsistent) {
  auto vids = small_set(7, 3);
  std::reverse(vids.begin(), vids.end());
  const auto m = init_model<double>(eval_config(), 5, 0.3);
  const auto r = evaluate(m, records_of(vids), memory_loader(vids));
  ASSERT_EQ(r.rows.size(), 7u);
  for (std::size_t i = 1; i < r.rows.size(); ++i) EXPECT_LT(r.rows[i - 1].video_id, r.rows[i].video_id);
  std::vector<double> p, g;
  for (const auto& row : r.rows) {
    p.push_back(row.pred);
    g.push_back(row.gt);
    EXPECT_DOUBLE_EQ(row.abs_error, std::abs(row.gt - row.pred));
  }
  EXPECT_EQ(r.mae, mae(p, g));
  EXPECT_EQ(r.obo, obo(p, g));
}

TEST(Evaluate, MissingFeaturesAreReportedNotFatal) {
  const auto vids = small_set(3, 4);
  auto recs = records_of(vids);
  recs.push_back({"ghost", "x", 40, 30, {{0, 9}}});
  const auto r = evaluate(zero_model<double>(eval_config()), recs, memory_loader(vids));
  EXPECT_EQ(r.rows.size(), 3u);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].video_id, "ghost");
  EXPECT_NE(format_eval_report(r).find("ghost,,,,error"), std::string::npos);
}

TEST(Evaluate, ZeroCountExcludedFromMaeButInObo) {
  auto vids = small_set(2, 5);
  vids[1].record.cycles.clear();
  const auto m = init_model<double>(eval_config(), 1, 0.01);
  const auto r = evaluate(m, records_of(vids), memory_loader(vids));
  ASSERT_EQ(r.rows.size(), 2u);
  const auto& zero_row = r.rows[0].gt == 0 ? r.rows[0] : r.rows[1];
  const auto& other = r.rows[0].gt == 0 ? r.rows[1] : r.rows[0];
  EXPECT_TRUE(zero_row.excluded_from_mae);
  EXPECT_DOUBLE_EQ(r.mae, std::abs(other.gt - other.pred) / other.gt);
  EXPECT_EQ(r.obo, obo({r.rows[0].pred, r.rows[1].pred}, {r.rows[0].gt, r.rows[1].gt}));
  EXPECT_NE(format_eval_report(r).find("zero_count_excluded_from_mae"), std::string::npos);
}

TEST(Evaluate, RoundingFlag) {
  const auto vids = small_set(3, 6);
  const auto m = init_model<double>(eval_config(), 2, 0.17);
  const auto r = evaluate(m, records_of(vids), memory_loader(vids), {true});
  for (const auto& row : r.rows) EXPECT_EQ(row.pred, std::round(row.pred));
}

TEST(Plot, ZeroMapsAreBlack) {
  const auto pgm = encode_pgm({std::vector<double>(8, 0.0), std::vector<double>(8, 0.0)});
  const std::string header = "P5\n8 2\n255\n";
  ASSERT_EQ(pgm.substr(0, header.size()), header);
  for (std::size_t i = header.size(); i < pgm.size(); ++i) EXPECT_EQ(pgm[i], 0);
  EXPECT_EQ(pgm.size(), header.size() + 16);
}

TEST(Plot, ThreeCyclesGiveThreeBlobs) {
  const auto target = make_density_target({{2, 14}, {22, 34}, {44, 58}}, 64, TargetVariant::mid);
  const auto row = to_gray_row(target.data);
  int blobs = 0;
  bool inside = false;
  for (unsigned char v : row) {
    const bool bright = v > 128;
    if (bright && !inside) ++blobs;
    inside = bright;
  }
  EXPECT_EQ(blobs, 3);
  EXPECT_EQ(*std::max_element(row.begin(), row.end()), 255);
}

TEST(Plot, FilesWithAndWithoutTarget) {
  const std::vector<double> pred{0.1, 0.4, 0.2, 0.0};
  const auto with = scratch("with"), without = scratch("without");
  emit_plot(pred, std::vector<double>{0.0, 0.5, 0.5, 0.0}, with);
  emit_plot(pred, std::nullopt, without);
  EXPECT_EQ(io::read_file(fs::path(with.string() + ".csv")).substr(0, 18), "frame,pred,target\n");
  const auto csv = io::read_file(fs::path(without.string() + ".csv"));
  EXPECT_EQ(csv.substr(0, 11), "frame,pred\n");
  EXPECT_EQ(csv.find("0.4"), csv.find(",0.4") + 1);
  EXPECT_EQ(io::read_file(fs::path(with.string() + ".pgm")).substr(0, 7), "P5\n4 2\n");
  EXPECT_EQ(io::read_file(fs::path(without.string() + ".pgm")).substr(0, 7), "P5\n4 1\n");
  EXPECT_THROW(emit_plot(pred, std::nullopt, "/nonexistent_dir/x/plot"), std::runtime_error);
}
