#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"

using namespace transrac;
using testutil::random_tensor;

namespace {

EncoderParams<double> random_encoder(std::size_t df, std::size_t de, std::uint64_t seed) {
  return {random_tensor({3, 3, 3, df, de}, seed, -0.5, 0.5), random_tensor({de}, seed + 1, -0.2, 0.2)};
}

// Direct summation over every output and input coordinate pair.
Tensor<double> conv_oracle(const Tensor<double>& x, const EncoderParams<double>& p) {
  const int n = static_cast<int>(x.dim(0)), h = static_cast<int>(x.dim(1)),
            w = static_cast<int>(x.dim(2)), ci = static_cast<int>(x.dim(3)),
            co = static_cast<int>(p.weight.dim(4));
  auto X = [&](int t, int y, int xx, int c) { return x[((t * h + y) * w + xx) * ci + c]; };
  auto W = [&](int a, int b, int d, int i, int o) {
    return p.weight[(((a * 3 + b) * 3 + d) * ci + i) * co + o];
  };
  Tensor<double> out({x.dim(0), x.dim(1), x.dim(2), static_cast<std::size_t>(co)});
  for (int t = 0; t < n; ++t)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx)
        for (int o = 0; o < co; ++o) {
          double s = p.bias[o];
          for (int t2 = 0; t2 < n; ++t2)
            for (int y2 = 0; y2 < h; ++y2)
              for (int x2 = 0; x2 < w; ++x2) {
                const int a = t2 - t + 1, b = y2 - y + 1, d = x2 - xx + 1;
                if (a < 0 || a > 2 || b < 0 || b > 2 || d < 0 || d > 2) continue;
                for (int i = 0; i < ci; ++i) s += W(a, b, d, i, o) * X(t2, y2, x2, i);
              }
          out[((t * h + y) * w + xx) * co + o] = std::max(0.0, s);
        }
  return out;
}

}  // namespace

TEST(ProvideFeatures, ConstantProvider) {
  FunctionProvider p({2, 3, 4}, [](std::span<const int>) {
    Tensor<float> g({2, 3, 4});
    g.fill(0.25f);
    return g;
  });
  const auto f = provide_features<double>(build_clipset(8, 4), sample_frames(20, 8), p, {2, 3, 4});
  EXPECT_EQ(f.shape, (Shape{8, 2, 3, 4}));
  for (double v : f.data) EXPECT_EQ(v, 0.25);
}

TEST(ProvideFeatures, SyntheticFramesArePhaseDependent) {
  SynthSpec spec;
  spec.num_frames = 64;
  spec.num_cycles = 4;
  spec.cycle_length_min = spec.cycle_length_max = 12;
  spec.noise_sigma = 0;
  const auto seq = generate_synthetic(spec, 3);
  const FrameFeatureProvider provider(seq.features);
  const auto f = provide_features<double>(build_clipset(64, 1), sample_frames(64, 64), provider,
                                          {2, 2, 16});
  const std::size_t cell = 2 * 2 * 16;
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_FLOAT_EQ(f[i], seq.features[i]);
  const auto& c = seq.cycles.front();
  // Same phase in consecutive cycles gives the same feature; a different phase does not.
  const auto a = static_cast<std::size_t>(c.start_frame + 2);
  const auto b = a + 12;
  const auto off = a + 5;
  double same = 0, diff = 0;
  for (std::size_t i = 0; i < cell; ++i) {
    same = std::max(same, std::abs(f[a * cell + i] - f[b * cell + i]));
    diff = std::max(diff, std::abs(f[a * cell + i] - f[off * cell + i]));
  }
  EXPECT_LT(same, 1e-5);
  EXPECT_GT(diff, 1e-2);
}

TEST(ProvideFeatures, NanNamesClip) {
  FunctionProvider p({1, 1, 2}, [](std::span<const int> frames) {
    Tensor<float> g({1, 1, 2});
    if (frames[0] == 5) g[1] = std::numeric_limits<float>::quiet_NaN();
    return g;
  });
  try {
    provide_features<double>(build_clipset(8, 1), sample_frames(8, 8), p, {1, 1, 2});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("clip 5"), std::string::npos) << e.what();
  }
}

TEST(ProvideFeatures, DimensionMismatch) {
  FunctionProvider p({1, 1, 2}, [](std::span<const int>) { return Tensor<float>({1, 1, 2}); });
  EXPECT_THROW(provide_features<double>(build_clipset(8, 1), sample_frames(8, 8), p, {1, 1, 3}),
               ShapeError);
}

TEST(TemporalContext, ZeroWeightsGiveZero) {
  EncoderParams<double> p{Tensor<double>({3, 3, 3, 4, 5}), Tensor<double>({5})};
  const auto out = temporal_context(random_tensor({6, 2, 2, 4}, 1), p);
  for (double v : out.data) EXPECT_EQ(v, 0.0);
}

TEST(TemporalContext, IdentityKernel) {
  const std::size_t d = 3;
  EncoderParams<double> p{Tensor<double>({3, 3, 3, d, d}), Tensor<double>({d})};
  for (std::size_t c = 0; c < d; ++c) p.weight[((13) * d + c) * d + c] = 1.0;  // center tap (1,1,1)
  const auto x = random_tensor({5, 2, 3, d}, 2, 0.0, 1.0);
  const auto out = temporal_context(x, p);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(out[i], x[i]);
}

TEST(TemporalContext, MatchesDirectSummation) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = random_tensor({7, 3, 2, 4}, seed * 10);
    const auto p = random_encoder(4, 5, seed * 10 + 1);
    const auto got = temporal_context(x, p);
    const auto want = conv_oracle(x, p);
    ASSERT_EQ(got.shape, want.shape);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-10);
    for (double v : got.data) EXPECT_GE(v, 0.0);
  }
}

TEST(SpatialMaxpool, OneByOneIsIdentity) {
  const auto x = random_tensor({4, 1, 1, 3}, 3);
  const auto y = spatial_maxpool(x);
  EXPECT_EQ(y.shape, (Shape{4, 3}));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(SpatialMaxpool, PicksLargeEntry) {
  Tensor<double> x({1, 2, 2, 2});
  x[(3) * 2 + 0] = 5.0;  // cell 3, channel 0
  x[(1) * 2 + 1] = 7.0;  // cell 1, channel 1
  const auto y = spatial_maxpool(x);
  EXPECT_EQ(y[0], 5.0);
  EXPECT_EQ(y[1], 7.0);
}

TEST(SpatialMaxpool, PermutationInvariantAndMonotone) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_tensor({3, 2, 3, 4}, 100 + trial);
    const auto y = spatial_maxpool(x);
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor<double> xp(x.shape);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t c = 0; c < 6; ++c)
        for (std::size_t ch = 0; ch < 4; ++ch)
          xp[(t * 6 + perm[c]) * 4 + ch] = x[(t * 6 + c) * 4 + ch];
    EXPECT_EQ(spatial_maxpool(xp), y);
    Tensor<double> bumped = x;
    bumped[rng() % x.size()] += 0.3;
    const auto yb = spatial_maxpool(bumped);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_GE(yb[i], y[i]);
  }
}

TEST(EncodeScale, SingleFrameVideoGivesConstantInteriorRows) {
  Tensor<float> frames({1, 2, 2, 3});
  for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = 0.1f * static_cast<float>(i);
  const FrameFeatureProvider provider(frames);
  const auto p = random_encoder(3, 4, 8);
  const auto map = sample_frames(1, 16);
  for (int scale : {1, 4, 8}) {
    const auto e = encode_scale(build_clipset(16, scale), map, provider, p);
    EXPECT_EQ(e.values.shape, (Shape{16, 4}));
    // Zero temporal padding touches only the first and last rows.
    for (std::size_t t = 2; t < 15; ++t)
      for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(e.values[t * 4 + c], e.values[4 + c]);
  }
}

TEST(EncodeScale, AllScalesGiveNByDe) {
  SynthSpec spec;
  const auto seq = generate_synthetic(spec, 1);
  const FrameFeatureProvider provider(seq.features);
  const auto p = random_encoder(16, 32, 4);
  for (int scale : {1, 4, 8}) {
    const auto e = encode_scale(build_clipset(64, scale), sample_frames(64, 64), provider, p);
    EXPECT_EQ(e.values.shape, (Shape{64, 32}));
    EXPECT_EQ(e.scale, scale);
    EXPECT_TRUE(e.values.all_finite());
  }
}

TEST(EncodeScale, ZeroChannelPaddingIsInert) {
  const auto base = random_tensor({12, 2, 2, 3}, 21);
  Tensor<float> f3({12, 2, 2, 3}), f6({12, 2, 2, 6});
  for (std::size_t i = 0; i < base.size(); ++i) {
    f3[i] = static_cast<float>(base[i]);
    f6[(i / 3) * 6 + i % 3] = static_cast<float>(base[i]);
  }
  const auto p3 = random_encoder(3, 5, 30);
  EncoderParams<double> p6{Tensor<double>({3, 3, 3, 6, 5}), p3.bias};
  for (std::size_t tap = 0; tap < 27; ++tap)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t o = 0; o < 5; ++o) p6.weight[(tap * 6 + i) * 5 + o] = p3.weight[(tap * 3 + i) * 5 + o];
  const auto map = sample_frames(12, 12);
  const auto a = encode_scale(build_clipset(12, 4), map, FrameFeatureProvider(f3), p3);
  const auto b = encode_scale(build_clipset(12, 4), map, FrameFeatureProvider(f6), p6);
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
}
