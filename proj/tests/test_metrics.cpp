#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "lcasc/metrics.hpp"

using namespace lcasc;

namespace {

ActivationTensor hand_code(double factor) {
  ActivationTensor a(1, 2, 3);
  const double v[] = {1, 2, 0, 0, -1, 3};
  for (std::size_t i = 0; i < 6; ++i) a.values()[i] = factor * v[i];
  return a;
}

const EncodingInfo kUnit{ModelKind::sparse_coding, true};

}  // namespace

TEST(PercentActive, ExactAndEpsilon) {
  const ActivationTensor a = hand_code(1.0);
  EXPECT_DOUBLE_EQ(percent_active(a), 4.0 / 6.0);
  ActivationTensor tiny = a;
  tiny.values()[0] = 1e-14;
  EXPECT_DOUBLE_EQ(percent_active(tiny), 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(percent_active(tiny, kActiveEpsilon), 3.0 / 6.0);
  EXPECT_EQ(percent_active(ActivationTensor(2, 2, 4)), 0.0);
}

TEST(Usage, HandComputed) {
  const std::vector<ActivationTensor> codes{hand_code(1.0), hand_code(2.0)};
  const auto u = usage_frequency(codes);
  ASSERT_EQ(u.size(), 3u);
  EXPECT_DOUBLE_EQ(u[0], 0.5);
  EXPECT_DOUBLE_EQ(u[1], 1.0);
  EXPECT_DOUBLE_EQ(u[2], 0.5);
}

TEST(CrossCorr, HandComputedPairs) {
  const auto pairs = crosscorr_pairs(hand_code(1.0));
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_DOUBLE_EQ(pairs[0], 2.0);
  EXPECT_DOUBLE_EQ(pairs[1], 0.0);
  EXPECT_DOUBLE_EQ(pairs[2], 3.0);
  const PairStats s = intra_image_crosscorr(hand_code(1.0));
  EXPECT_DOUBLE_EQ(s.mean, 5.0 / 3.0);
  EXPECT_NEAR(s.std, std::sqrt(42.0 / 27.0), 1e-14);
}

TEST(CrossCorr, CorpusSummaries) {
  const std::vector<ActivationTensor> codes{hand_code(1.0), hand_code(2.0)};
  const CrossCorrStats s = corpus_crosscorr(codes, kUnit);
  // Pair products scale quadratically: image 2 has pairs [8, 0, 12].
  EXPECT_DOUBLE_EQ(s.mean, 25.0 / 6.0);
  EXPECT_NEAR(s.inter_std, 2.5, 1e-14);
  EXPECT_NEAR(s.intra_std, 2.5 * std::sqrt(42.0 / 27.0), 1e-14);
  EXPECT_NEAR(s.pooled_std, std::sqrt(701.0 / 36.0), 1e-14);
}

TEST(CrossCorr, DisjointSupportIsZero) {
  ActivationTensor a(2, 2, 2);
  a(0, 0, 0) = 1.0;
  a(1, 1, 1) = -4.0;
  EXPECT_EQ(intra_image_crosscorr(a).mean, 0.0);
}

TEST(CrossCorr, Preconditions) {
  EXPECT_THROW(intra_image_crosscorr(ActivationTensor(2, 2, 1)), InvalidArgument);
  EXPECT_THROW(corpus_crosscorr({}, kUnit), InvalidArgument);
  const std::vector<ActivationTensor> codes{hand_code(1.0)};
  EXPECT_THROW(corpus_crosscorr(codes, {ModelKind::autoencoder, false}), InvalidArgument);
  const std::vector<ActivationTensor> mixed{hand_code(1.0), ActivationTensor(1, 2, 4)};
  EXPECT_THROW(usage_frequency(mixed), DimensionError);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(median({}), 0.0);
}

TEST(Report, AccountingIdentityOnRandomCodes) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t K = 2 + seed % 7, h = 1 + seed % 5, w = 2 + seed % 3;
    std::vector<ActivationTensor> codes(1 + seed % 9, ActivationTensor(h, w, K));
    const double density = u(g);
    for (auto& a : codes) {
      for (double& v : a.values()) v = u(g) < density ? u(g) - 0.5 : 0.0;
    }
    const MetricsReport r = analyze_codes(codes, kUnit);
    const AccountingCheck c = accounting_identity(r);
    EXPECT_TRUE(c.holds()) << "seed " << seed << ": " << c.from_usage << " / "
                           << c.from_percent_active << " / " << c.direct;
    std::uint64_t direct = 0;
    for (const auto& a : codes) direct += count_nonzero(a);
    EXPECT_EQ(c.direct, direct);
  }
}

TEST(Report, FieldsPopulated) {
  const std::vector<ActivationTensor> codes{hand_code(1.0), hand_code(2.0)};
  const MetricsReport r = analyze_codes(codes, {ModelKind::autoencoder, true});
  EXPECT_EQ(r.model_kind, ModelKind::autoencoder);
  EXPECT_EQ(r.percent_active_per_image.size(), 2u);
  EXPECT_EQ(r.usage_frequency_per_element.size(), 3u);
  EXPECT_DOUBLE_EQ(r.intra_mean_per_image[1], 20.0 / 3.0);
  EXPECT_EQ(r.nonzero_total, 8u);
  EXPECT_EQ(r.sites_per_image, 2u);
}

TEST(PercentActive, AllNonzeroIsOne) {
  EXPECT_EQ(percent_active(ActivationTensor(3, 2, 4, 0.1)), 1.0);
}

TEST(Usage, NeverAndAlwaysActive) {
  ActivationTensor a(2, 2, 2);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 2; ++c) a(r, c, 1) = -1.0;
  }
  const std::vector<ActivationTensor> codes{a, a};
  const auto u = usage_frequency(codes);
  EXPECT_EQ(u[0], 0.0);
  EXPECT_EQ(u[1], 1.0);
}

TEST(CrossCorr, IdenticalMapsGiveSquaredNorm) {
  ActivationTensor a(2, 2, 2);
  const double m[] = {1.0, -2.0, 0.5, 3.0};
  for (std::size_t i = 0; i < 4; ++i) {
    a(i / 2, i % 2, 0) = m[i];
    a(i / 2, i % 2, 1) = m[i];
  }
  const auto pairs = crosscorr_pairs(a);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_DOUBLE_EQ(pairs[0], 1 + 4 + 0.25 + 9);
}

TEST(CrossCorr, ThreeSmallMaps) {
  // Maps over two sites: [1,0], [0,1], [1,1].
  ActivationTensor a(1, 2, 3);
  a(0, 0, 0) = 1;
  a(0, 1, 1) = 1;
  a(0, 0, 2) = 1;
  a(0, 1, 2) = 1;
  auto pairs = crosscorr_pairs(a);
  std::sort(pairs.begin(), pairs.end());
  EXPECT_EQ(pairs, (std::vector<double>{0, 1, 1}));
  EXPECT_DOUBLE_EQ(intra_image_crosscorr(a).mean, 2.0 / 3.0);
}

TEST(CrossCorr, IdenticalImagesHaveNoInterImageSpread) {
  const std::vector<ActivationTensor> same{hand_code(1.0), hand_code(1.0), hand_code(1.0)};
  EXPECT_EQ(corpus_crosscorr(same, kUnit).inter_std, 0.0);
  const std::vector<ActivationTensor> zeros(3, ActivationTensor(2, 2, 3));
  const CrossCorrStats z = corpus_crosscorr(zeros, kUnit);
  EXPECT_EQ(z.mean, 0.0);
  EXPECT_EQ(z.intra_std, 0.0);
  EXPECT_EQ(z.inter_std, 0.0);
}
