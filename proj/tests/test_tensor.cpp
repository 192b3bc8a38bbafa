#include <gtest/gtest.h>

#include "lcasc/tensor.hpp"
#include "oracles.hpp"

using namespace lcasc;

namespace {

ImageTensor counting_image(std::size_t n) {
  ImageTensor img(n, n, 1);
  double v = 1.0;
  for (double& x : img.values()) x = v++;
  return img;
}

}  // namespace

TEST(Tensor, IndexingIsRowColumnChannel) {
  ImageTensor t(2, 3, 2);
  t(1, 2, 1) = 7.0;
  EXPECT_EQ(t.values()[(1 * 3 + 2) * 2 + 1], 7.0);
  EXPECT_EQ(t.fiber(1, 2)[1], 7.0);
  EXPECT_THROW(ImageTensor(2, 2, 1, std::vector<double>(3)), DimensionError);
}

TEST(Tensor, RelativeErrorUsesFloor) {
  EXPECT_NEAR(relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-9), 1e-9 / 1e-6);
}

TEST(Geometry, MapExtent) {
  EXPECT_EQ(map_extent(64, 8, 4, "height"), 15u);
  EXPECT_EQ(map_extent(128, 16, 4, "height"), 29u);
  EXPECT_EQ(image_extent(15, 8, 4), 64u);
  try {
    map_extent(65, 8, 4, "width");
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("width"), std::string::npos);
  }
  EXPECT_THROW(map_extent(4, 8, 4, "height"), DimensionError);
}

TEST(Correlate, HandComputedDifferenceFilter) {
  Dictionary d({1, 2, 1, 1}, {1, 0, 0, -1});
  const ActivationTensor a = correlate(counting_image(3), d);
  ASSERT_EQ(a.rows(), 2u);
  ASSERT_EQ(a.cols(), 2u);
  for (double v : a.values()) EXPECT_DOUBLE_EQ(v, -4.0);
}

TEST(Correlate, StridedTwoElements) {
  // 4x4 counting image, patch 2, stride 2: four disjoint blocks.
  Dictionary d({2, 2, 1, 2}, {1, 1, 1, 1, 1, 0, 0, 0});
  const ActivationTensor a = correlate(counting_image(4), d);
  ASSERT_EQ(a.rows(), 2u);
  EXPECT_DOUBLE_EQ(a(0, 0, 0), 1 + 2 + 5 + 6);
  EXPECT_DOUBLE_EQ(a(1, 1, 0), 11 + 12 + 15 + 16);
  EXPECT_DOUBLE_EQ(a(0, 1, 1), 3);
  EXPECT_DOUBLE_EQ(a(1, 0, 1), 9);
}

TEST(ConvTranspose, HandComputedOverlap) {
  Dictionary d({1, 2, 1, 1}, {1, 2, 3, 4});
  ActivationTensor a(2, 2, 1);
  a(0, 0, 0) = 1.0;
  a(1, 1, 0) = 2.0;
  const ImageTensor out = conv_transpose(a, d, 3, 3);
  const std::vector<double> expect{1, 2, 0, 3, 6, 4, 0, 6, 8};
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_DOUBLE_EQ(out.values()[i], expect[i]);
}

TEST(ConvTranspose, IsAdjointOfCorrelate) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DictShape s{5, 4, 3, 2};
    const Dictionary d = oracle::random_dictionary(seed, s, false);
    const ImageTensor x = oracle::random_image(seed + 10, 10, 12, 3);
    ActivationTensor a(4, 5, 5);
    std::mt19937_64 g(seed);
    std::normal_distribution<double> n;
    for (double& v : a.values()) v = n(g);
    const double lhs = dot(correlate(x, d).values(), a.values());
    const double rhs = dot(x.values(), conv_transpose(a, d, 10, 12).values());
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(ConvTranspose, MatchesDenseSynthesisMatrix) {
  const DictShape s{3, 3, 2, 1};
  const Dictionary d = oracle::random_dictionary(4, s);
  const auto p = oracle::dense_synthesis(d, 5, 6);
  ActivationTensor a(p.map_h, p.map_w, 3);
  std::mt19937_64 g(9);
  std::normal_distribution<double> n;
  for (double& v : a.values()) v = n(g);
  const auto y = oracle::multiply(p, std::vector<double>(a.values().begin(), a.values().end()));
  const ImageTensor out = conv_transpose(a, d, 5, 6);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(out.values()[i], y[i], 1e-12);
}

TEST(PatchProducts, HandComputed) {
  ActivationTensor a(2, 2, 1);
  a(0, 0, 0) = 1.0;
  a(1, 1, 0) = 2.0;
  const Dictionary g = patch_coefficient_products(counting_image(3), a, {1, 2, 1, 1});
  const std::vector<double> expect{11, 14, 20, 23};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(g.values()[i], expect[i]);
}

TEST(Dictionary, NormalizeGivesUnitElements) {
  Dictionary d = oracle::random_dictionary(1, {7, 3, 2, 1}, false);
  d.normalize_elements();
  for (std::size_t k = 0; k < 7; ++k) EXPECT_NEAR(squared_norm(d.element(k)), 1.0, 1e-12);
}

TEST(Dictionary, ShapeChecks) {
  EXPECT_THROW(Dictionary({2, 2, 1, 1}, std::vector<double>(7)), DimensionError);
  const Dictionary d = oracle::random_dictionary(2, {2, 2, 3, 1});
  EXPECT_THROW(correlate(ImageTensor(4, 4, 1), d), DimensionError);
  EXPECT_THROW(conv_transpose(ActivationTensor(3, 3, 3), d, 4, 4), DimensionError);
}

TEST(Correlate, OnesImageOnesElement) {
  const ImageTensor ones(3, 3, 1, 1.0);
  const Dictionary d({1, 2, 1, 1}, {1, 1, 1, 1});
  const ActivationTensor a = correlate(ones, d);
  ASSERT_EQ(a.rows(), 2u);
  ASSERT_EQ(a.cols(), 2u);
  for (double v : a.values()) EXPECT_EQ(v, 4.0);
  const ActivationTensor z = correlate(ImageTensor(3, 3, 1), d);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(Correlate, LargeGeometryShape) {
  const ImageTensor x(128, 128, 3);
  const Dictionary d({128, 16, 3, 4});
  const ActivationTensor a = correlate(x, d);
  EXPECT_EQ(a.rows(), 29u);  // valid placement: (128 - 16) / 4 + 1
  EXPECT_EQ(a.cols(), 29u);
  EXPECT_EQ(a.depth(), 128u);
}

TEST(ConvTranspose, OverlapAddOfOnes) {
  const Dictionary d({1, 2, 1, 1}, {1, 1, 1, 1});
  const ActivationTensor a(2, 2, 1, 1.0);
  const ImageTensor out = conv_transpose(a, d, 3, 3);
  const std::vector<double> expect{1, 2, 1, 2, 4, 2, 1, 2, 1};
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(out.values()[i], expect[i]);
  const ImageTensor z = conv_transpose(ActivationTensor(2, 2, 1), d, 3, 3);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(ConvTranspose, SingleCoefficientPastesElement) {
  const Dictionary d = oracle::random_dictionary(3, {3, 2, 2, 2});
  ActivationTensor a(3, 3, 3);
  a(1, 2, 1) = 1.0;
  const ImageTensor out = conv_transpose(a, d, 6, 6);
  const auto e = d.element(1);
  for (std::size_t y = 0; y < 6; ++y) {
    for (std::size_t x = 0; x < 6; ++x) {
      for (std::size_t c = 0; c < 2; ++c) {
        const bool inside = y >= 2 && y < 4 && x >= 4 && x < 6;
        const double expect = inside ? e[((y - 2) * 2 + (x - 4)) * 2 + c] : 0.0;
        EXPECT_EQ(out(y, x, c), expect);
      }
    }
  }
}

TEST(Vector, DotAndAxpy) {
  const std::vector<double> a{1, 2}, b{3, 4}, z{0, 0};
  EXPECT_EQ(dot(a, b), 11.0);
  EXPECT_EQ(dot(a, z), 0.0);
  std::vector<double> y{0, 1};
  axpy(2.0, std::vector<double>{1, 1}, y);
  EXPECT_EQ(y, (std::vector<double>{2, 3}));
}
