#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace transrac;
using testutil::random_tensor;

namespace {

AttentionHeads<double> random_heads(std::size_t h, std::size_t de, std::size_t dh, std::uint64_t seed) {
  return {random_tensor({h, de, dh}, seed), random_tensor({h, de, dh}, seed + 1)};
}

}  // namespace

TEST(Attention, IdenticalRowsGiveUniform) {
  Tensor<double> x({5, 4});
  const auto row = random_tensor({4}, 1);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 4; ++c) x[i * 4 + c] = row[c];
  const auto a = attention_correlation(x, random_heads(2, 4, 2, 2));
  for (double v : a.data) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(Attention, SingleFrame) {
  const auto a = attention_correlation(random_tensor({1, 4}, 3), random_heads(2, 4, 2, 4));
  EXPECT_EQ(a.shape, (Shape{1, 1, 2}));
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(a[1], 1.0);
}

TEST(Attention, MatchesPerEntryOracle) {
  const std::size_t n = 4, de = 6, h = 2, dh = 3;
  const auto x = random_tensor({n, de}, 5);
  const auto p = random_heads(h, de, dh, 6);
  const auto a = attention_correlation(x, p);
  for (std::size_t head = 0; head < h; ++head)
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> e(n);
      double z = 0;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < dh; ++k) {
          double q = 0, kk = 0;
          for (std::size_t c = 0; c < de; ++c) {
            q += x[i * de + c] * p.query[(head * de + c) * dh + k];
            kk += x[j * de + c] * p.key[(head * de + c) * dh + k];
          }
          s += q * kk;
        }
        e[j] = std::exp(s / std::sqrt(static_cast<double>(dh)));
        z += e[j];
      }
      for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(a[(i * n + j) * h + head], e[j] / z, 1e-12);
    }
}

TEST(Attention, RowsAreDistributions) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = attention_correlation(random_tensor({9, 8}, seed, -3, 3), random_heads(4, 8, 2, seed + 50));
    for (std::size_t h = 0; h < 4; ++h)
      for (std::size_t i = 0; i < 9; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 9; ++j) {
          const double v = a[(i * 9 + j) * 4 + h];
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 1.0);
          s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-6);
      }
  }
}

TEST(Attention, ShiftInvariantScores) {
  const std::size_t n = 6;
  auto scores = random_tensor({n, n}, 7, -4, 4).data;
  auto shifted = scores;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) shifted[i * n + j] += 3.5 + static_cast<double>(i);
  Tensor<double> a({n, n, 1}), b({n, n, 1});
  detail::attention_from_scores(scores, n, a, 0);
  detail::attention_from_scores(shifted, n, b, 0);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(Attention, NonFiniteScoresRaise) {
  auto x = random_tensor({3, 4}, 8);
  x[2] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(attention_correlation(x, random_heads(1, 4, 4, 9)), NumericError);
}

TEST(Tsm, IdenticalRowsGiveUniform) {
  Tensor<double> x({4, 3});
  x.fill(0.7);
  for (double v : tsm_correlation(x).data) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Tsm, RawScoresAreNegativeDistances) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = random_tensor({7, 5}, seed);
    const auto s = tsm_scores(x);
    for (std::size_t i = 0; i < 7; ++i) {
      EXPECT_EQ(s[i * 7 + i], 0.0);
      for (std::size_t j = 0; j < 7; ++j) {
        EXPECT_LE(s[i * 7 + j], 0.0);
        EXPECT_EQ(s[i * 7 + j], s[j * 7 + i]);
        double d = 0;
        for (std::size_t c = 0; c < 5; ++c) d += (x[i * 5 + c] - x[j * 5 + c]) * (x[i * 5 + c] - x[j * 5 + c]);
        EXPECT_NEAR(s[i * 7 + j], -d / std::sqrt(5.0), 1e-12);
      }
    }
  }
}

TEST(Tsm, ArgmaxOnDiagonalForDistinctRows) {
  const auto c = tsm_correlation(random_tensor({3, 4}, 12));
  EXPECT_EQ(c.shape, (Shape{3, 3, 1}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (j != i) {
        EXPECT_GT(c[i * 3 + i], c[i * 3 + j]);
      }
}

TEST(Fuse, DefaultConfigShapes) {
  auto cfg = ModelConfig::desk();
  for (auto mode : {CorrelationMode::attention, CorrelationMode::tsm}) {
    cfg.mode = mode;
    const auto m = init_model<double>(cfg, 1);
    ScaleFeatures<double> f;
    for (std::size_t s = 0; s < 3; ++s) f.push_back(random_tensor({64, 2, 2, 16}, s));
    const auto c = correlate(m, f);
    EXPECT_EQ(c.shape, (Shape{64, 64, mode == CorrelationMode::attention ? 12u : 3u}));
  }
}

TEST(Fuse, SingleScalePassthroughAndSliceRecovers) {
  const auto a = random_tensor({5, 5, 4}, 1), b = random_tensor({5, 5, 4}, 2),
             c = random_tensor({5, 5, 4}, 3);
  EXPECT_EQ(fuse_scales<double>({a}), a);
  const auto f = fuse_scales<double>({a, b, c});
  EXPECT_EQ(f.shape, (Shape{5, 5, 12}));
  EXPECT_EQ(slice_channels(f, 0, 4), a);
  EXPECT_EQ(slice_channels(f, 4, 4), b);
  EXPECT_EQ(slice_channels(f, 8, 4), c);
  EXPECT_THROW(fuse_scales<double>({a, random_tensor({5, 5, 3}, 4)}), ShapeError);
  EXPECT_THROW(fuse_scales<double>({a, random_tensor({4, 4, 4}, 4)}), ShapeError);
}
