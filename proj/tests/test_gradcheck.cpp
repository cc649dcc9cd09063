#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace transrac;

TEST(GradCheck, AttentionPresetPasses) {
  const auto r = grad_check(ModelConfig::gradcheck(), 0);
  EXPECT_TRUE(r.pass) << "global max " << r.global_max;
  EXPECT_LE(r.global_max, 1e-4);
  for (const auto& t : r.tensors) {
    EXPECT_GE(t.max_rel_error, 0.0);
    EXPECT_FALSE(t.under_sampled) << t.name;
  }
  // Every trainable tensor of every module is covered.
  const auto names = [&] {
    std::vector<std::string> n;
    for (const auto& t : r.tensors) n.push_back(t.name);
    return n;
  }();
  for (const char* want : {"encoder.conv.weight", "encoder.conv.bias", "correlation.scale1.query",
                           "correlation.scale8.key", "predictor.fusion.weight",
                           "predictor.input.weight", "predictor.layer0.attn.wq",
                           "predictor.layer0.ffn.w2", "predictor.layer0.ln2.gain",
                           "predictor.head.weight"})
    EXPECT_NE(std::find(names.begin(), names.end(), want), names.end()) << want;
}

TEST(GradCheck, TsmModePasses) {
  auto cfg = ModelConfig::gradcheck();
  cfg.mode = CorrelationMode::tsm;
  const auto r = grad_check(cfg, 1);
  EXPECT_TRUE(r.pass) << "global max " << r.global_max;
}

TEST(GradCheck, OtherSeedsPass) {
  for (std::uint64_t seed : {2u, 3u}) {
    const auto r = grad_check(ModelConfig::gradcheck(), seed);
    EXPECT_TRUE(r.pass) << "seed " << seed << " global max " << r.global_max;
  }
}

TEST(GradCheck, CorruptedConvGradientFails) {
  GradCheckOptions opt;
  opt.corrupt = [](ModelParams<double>& g) {
    for (auto& v : g.encoder.weight.data) v *= 1.01;
  };
  const auto r = grad_check(ModelConfig::gradcheck(), 0, opt);
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.global_max, 1e-3);
}

TEST(GradCheck, EpsSweepIsBoundedAndVShaped) {
  const std::vector<double> eps{1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
  std::vector<double> err;
  for (double e : eps) {
    GradCheckOptions opt;
    opt.eps = e;
    err.push_back(grad_check(ModelConfig::gradcheck(), 0, opt).global_max);
  }
  // 1e-4, 1e-5 and 1e-6 all pass.
  for (std::size_t i = 2; i <= 4; ++i) EXPECT_LE(err[i], 1e-4) << eps[i];
  // Truncation error falls as eps shrinks, rounding error grows: one interior minimum.
  const auto best = static_cast<std::size_t>(std::min_element(err.begin(), err.end()) - err.begin());
  EXPECT_GT(best, 0u);
  EXPECT_LT(best, eps.size() - 1);
  for (std::size_t i = 0; i < best; ++i) EXPECT_GT(err[i], err[i + 1]) << eps[i];
  for (std::size_t i = best; i + 1 < err.size(); ++i) EXPECT_LT(err[i], err[i + 1]) << eps[i];
}
