#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace transrac;
using testutil::phi_quadrature;

TEST(BinMass, QuadratureOracle) {
  const double center = 2 * phi_quadrature(0.5) - 1;
  const double side = phi_quadrature(1.5) - phi_quadrature(0.5);
  EXPECT_NEAR(center, 0.382925, 1e-6);
  EXPECT_NEAR(side, 0.241730, 1e-6);
  EXPECT_NEAR(gaussian_bin_mass(13, 1, 13), center, 1e-12);
  EXPECT_NEAR(gaussian_bin_mass(13, 1, 12), side, 1e-12);
  EXPECT_NEAR(gaussian_bin_mass(13, 1, 13), 0.382925, 1e-6);
  EXPECT_NEAR(gaussian_bin_mass(13, 1, 12), 0.241730, 1e-6);
}

TEST(BinMass, AgreesWithQuadratureAcrossOffsets) {
  for (double mu : {0.0, 3.3, 17.5})
    for (double sigma : {0.1, 0.7, 2.0})
      for (int dk = -5; dk <= 5; ++dk) {
        const double k = std::round(mu) + dk;
        const double want = phi_quadrature((k + 0.5 - mu) / sigma) - phi_quadrature((k - 0.5 - mu) / sigma);
        EXPECT_NEAR(gaussian_bin_mass(mu, sigma, k), want, 1e-12) << mu << " " << sigma << " " << k;
      }
}

TEST(BinMass, TailIsTiny) {
  for (double mu : {0.0, 10.4, 31.0})
    for (int off : {9, 12, 20}) {
      EXPECT_LT(gaussian_bin_mass(mu, 1, std::round(mu) + off), 1e-14);
      EXPECT_LT(gaussian_bin_mass(mu, 1, std::round(mu) - off), 1e-14);
      EXPECT_GE(gaussian_bin_mass(mu, 1, std::round(mu) + off), 0.0);
    }
}

TEST(BinMass, FullLineSumsToOne) {
  for (double mu : {0.0, 5.25, 13.0, 40.9})
    for (double sigma : {0.1, 1.0, 2.5, 6.0}) {
      double s = 0;
      for (double k = std::floor(mu - 10 * sigma) - 1; k <= std::ceil(mu + 10 * sigma) + 1; ++k)
        s += gaussian_bin_mass(mu, sigma, k);
      EXPECT_NEAR(s, 1.0, 1e-12) << mu << " " << sigma;
    }
}

TEST(BinMass, NonPositiveSigma) {
  EXPECT_THROW(gaussian_bin_mass(0, 0, 0), ValidationError);
  EXPECT_THROW(gaussian_bin_mass(0, -1, 0), ValidationError);
}

TEST(DensityTarget, SingleSpanMid) {
  const auto t = make_density_target({{10, 16}}, 64, TargetVariant::mid);
  const auto peak = std::max_element(t.data.begin(), t.data.end()) - t.data.begin();
  EXPECT_EQ(peak, 13);
  EXPECT_NEAR(count_from_density(t), 1.0, 1e-9);
}

TEST(DensityTarget, ZeroSpans) {
  for (auto v : {TargetVariant::begin, TargetVariant::mid, TargetVariant::end, TargetVariant::merge})
    for (double x : make_density_target({}, 32, v).data) EXPECT_EQ(x, 0.0);
}

TEST(DensityTarget, FiveSpans) {
  const auto t = make_density_target({{0, 9}, {12, 20}, {25, 33}, {40, 47}, {50, 63}}, 64, TargetVariant::mid);
  EXPECT_NEAR(count_from_density(t), 5.0, 1e-9);
}

TEST(DensityTarget, VariantsPlaceTheMean) {
  // sigma = 1 for a 6-bin span; the peak bin is the one holding mu.
  const std::vector<CycleSpan> s{{20, 26}};
  auto argmax = [](const Tensor<double>& t) {
    return std::max_element(t.data.begin(), t.data.end()) - t.data.begin();
  };
  EXPECT_EQ(argmax(make_density_target(s, 64, TargetVariant::begin)), 20);
  EXPECT_EQ(argmax(make_density_target(s, 64, TargetVariant::mid)), 23);
  EXPECT_EQ(argmax(make_density_target(s, 64, TargetVariant::end)), 26);
  const auto merge = make_density_target(s, 64, TargetVariant::merge);
  const auto b = make_density_target(s, 64, TargetVariant::begin);
  const auto m = make_density_target(s, 64, TargetVariant::mid);
  const auto e = make_density_target(s, 64, TargetVariant::end);
  for (std::size_t k = 0; k < 64; ++k) EXPECT_NEAR(merge[k], (b[k] + m[k] + e[k]) / 3, 1e-15);
}

TEST(DensityTarget, DegenerateSpanUsesFloor) {
  const auto t = make_density_target({{7, 7}}, 16, TargetVariant::mid);
  // Neighbors hold Phi(15) - Phi(5) each, about 2.9e-7.
  EXPECT_NEAR(t[7], 1.0, 1e-6);
  EXPECT_GT(t[7], 0.999999);
  EXPECT_NEAR(count_from_density(t), 1.0, 1e-12);
  EXPECT_THROW(make_density_target({{7, 7}}, 16, TargetVariant::mid, 0.0), ValidationError);
}

TEST(DensityTarget, OutOfRange) {
  EXPECT_THROW(make_density_target({{5, 16}}, 16, TargetVariant::mid), ValidationError);
  EXPECT_THROW(make_density_target({{-1, 3}}, 16, TargetVariant::mid), ValidationError);
}

TEST(DensityTarget, PropertiesOnRandomSpans) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = trial % 2 ? 64 : 37;
    const auto spans = testutil::random_spans(rng, n, 12);
    for (auto v : {TargetVariant::begin, TargetVariant::mid, TargetVariant::end, TargetVariant::merge}) {
      const auto t = make_density_target(spans, n, v);
      for (double x : t.data) EXPECT_GE(x, 0.0);
      EXPECT_NEAR(count_from_density(t), static_cast<double>(spans.size()), 1e-9);
    }
    for (const auto& s : spans) {
      const auto t = make_density_target({s}, n, TargetVariant::mid);
      const double mu = 0.5 * (s.start_frame + s.end_frame);
      const auto peak = std::max_element(t.data.begin(), t.data.end()) - t.data.begin();
      // With mu on a half-integer the two straddling bins tie.
      EXPECT_LE(std::abs(static_cast<double>(peak) - mu), 0.5);
    }
  }
}

TEST(DensityTarget, VariantNames) {
  for (auto v : {TargetVariant::begin, TargetVariant::mid, TargetVariant::end, TargetVariant::merge})
    EXPECT_EQ(parse_target_variant(to_string(v)), v);
  EXPECT_THROW(parse_target_variant("middle"), ValidationError);
}
