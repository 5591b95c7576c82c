#include "test_util.hpp"

using namespace logitcal;

TEST(Tensor, ShapeAndDataMustAgree) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  const Tensor t({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.at(1, 0), 4.0f);  // row-major, last axis fastest
}

TEST(Tensor, NonFiniteIsReported) {
  Tensor t({3}, std::vector<float>{1, std::nanf(""), 2});
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(t.require_finite("probe"), NonFiniteError);
}

TEST(Tensor, ArgmaxPrefersLowestIndexOnTies) {
  const std::vector<float> v{1, 3, 3, 0};
  EXPECT_EQ(argmax(v), 1u);
}

TEST(Tensor, NormsAndDistance) {
  const std::vector<float> v{3, -4};
  EXPECT_FLOAT_EQ(l2_norm(v), 5.0f);
  EXPECT_FLOAT_EQ(l1_norm(v), 7.0f);
  EXPECT_FLOAT_EQ(linf_distance(Tensor::vector({1, 5}), Tensor::vector({2, 1})), 4.0f);
}

TEST(DepthwiseConvolve, ImpulseGivesKernel) {
  Tensor img({1, 5, 5});
  img.at(0, 2, 2) = 1.0f;
  const Tensor k = Tensor::matrix(3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor out = depthwise_convolve(img, k);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(out.at(0, 1 + i, 1 + j), k.at(i, j));
    }
  }
  EXPECT_EQ(out.at(0, 0, 0), 0.0f);
}

TEST(DepthwiseConvolve, UnitKernelIsIdentity) {
  std::mt19937_64 rng(1);
  const Tensor img = testutil::random_tensor({2, 4, 5}, rng);
  EXPECT_EQ(depthwise_convolve(img, Tensor::matrix(1, 1, {1})), img);
}

TEST(DepthwiseConvolve, UniformInteriorUnchangedBySumOneKernel) {
  const Tensor img({1, 7, 7}, 3.0f);
  const Tensor k = Tensor::matrix(3, 3, {0.1f, 0.1f, 0.1f, 0.1f, 0.2f, 0.1f, 0.1f, 0.1f, 0.1f});
  const Tensor out = depthwise_convolve(img, k);
  for (std::size_t y = 1; y < 6; ++y) {
    for (std::size_t x = 1; x < 6; ++x) {
      // direct summation oracle
      double s = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) s += 3.0 * k.at(i, j);
      }
      EXPECT_NEAR(out.at(0, y, x), s, 1e-6);
      EXPECT_NEAR(out.at(0, y, x), 3.0f, 1e-5);
    }
  }
  EXPECT_LT(out.at(0, 0, 0), 3.0f);  // zero padding at the border
}

TEST(DepthwiseConvolve, ChannelsAreIndependentAndShapePreserved) {
  Tensor img({2, 4, 4});
  img.at(1, 1, 1) = 1.0f;
  const Tensor out = depthwise_convolve(img, Tensor::matrix(3, 3, {1, 1, 1, 1, 1, 1, 1, 1, 1}));
  EXPECT_EQ(out.shape(), img.shape());
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(out[i], 0.0f);
}

TEST(DepthwiseConvolve, EvenKernelRejected) {
  EXPECT_THROW(depthwise_convolve(Tensor({1, 4, 4}), Tensor({2, 2})), ShapeError);
  EXPECT_THROW(depthwise_convolve(Tensor({1, 4, 4}), Tensor({3, 2})), ShapeError);
}

TEST(DepthwiseConvolve, IsTrueConvolutionNotCorrelation) {
  // An asymmetric kernel applied to an impulse lands unflipped around it;
  // applied to a shifted impulse it shifts with it (shift equivariance).
  Tensor a({1, 7, 7}), b({1, 7, 7});
  a.at(0, 3, 3) = 1.0f;
  b.at(0, 3, 4) = 1.0f;
  const Tensor k = Tensor::matrix(3, 3, {0, 0, 0, 0, 0, 1, 0, 0, 0});
  const Tensor ca = depthwise_convolve(a, k), cb = depthwise_convolve(b, k);
  EXPECT_EQ(ca.at(0, 3, 4), 1.0f);
  EXPECT_EQ(cb.at(0, 3, 5), 1.0f);
}

TEST(FiniteDifference, Quadratic) {
  const auto g = finite_difference_gradient(
      [](const std::vector<double>& x) { return x[0] * x[0]; }, {3.0}, 1e-3);
  EXPECT_NEAR(g[0], 6.0, 1e-5);
}

TEST(FiniteDifference, ZeroFunction) {
  const auto g = finite_difference_gradient([](const std::vector<double>&) { return 0.0; },
                                            {1.0, -2.0, 5.0}, 1e-3);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(FiniteDifference, StepMustBePositive) {
  EXPECT_THROW(finite_difference_gradient([](const std::vector<double>&) { return 0.0; },
                                          {1.0}, 0.0),
               Error);
}
