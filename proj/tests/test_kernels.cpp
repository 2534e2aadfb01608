#include <gtest/gtest.h>

#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "dsm/kernels.hpp"
#include "oracles.hpp"

using namespace dsm;

TEST(SparseKernel, Examples) {
  EXPECT_DOUBLE_EQ(sparse_kernel(0.0, 0.2, 50.0), 50.0);
  EXPECT_EQ(sparse_kernel(0.2, 0.2, 50.0), 0.0);
  EXPECT_EQ(sparse_kernel(0.3, 0.2, 50.0), 0.0);
  for (double l : {0.1, 0.2, 1.0, 7.5}) EXPECT_NEAR(sparse_kernel(l / 2, l, 1.0), 1.0 / 6.0, 1e-15);
  EXPECT_THROW(sparse_kernel(-1e-9, 0.2, 1.0), std::invalid_argument);
  EXPECT_THROW(sparse_kernel(0.1, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(sparse_kernel(0.1, 0.2, 0.0), std::invalid_argument);
}

TEST(SparseKernel, MatchesMultiprecision) {
  for (int i = 0; i <= 2000; ++i) {
    const double d = 0.3 * i / 2000.0;
    ASSERT_NEAR(sparse_kernel(d, 0.3, 0.2), oracle::kernel(d, 0.3, 0.2), 1e-15) << d;
  }
}

TEST(SparseKernel, RelativeAccuracyNearSupportEdge) {
  for (int i = 1; i <= 2000; ++i) {
    const double d = 0.3 * (1.0 - std::pow(10.0, -7.0 * i / 2000.0));
    const double want = oracle::kernel(d, 0.3, 0.2);
    ASSERT_GT(want, 0.0);
    const double s = 1.0 - d / 0.3;
    ASSERT_NEAR(sparse_kernel(d, 0.3, 0.2) / want, 1.0, 1e-13 + 5e-15 / s) << d;
  }
}

TEST(SparseKernel, PositiveInsideSupport) {
  for (int i = 0; i < 1000; ++i) {
    const double d = 0.2 * i / 1000.0;
    EXPECT_GT(sparse_kernel(d, 0.2, 50.0), 0.0);
  }
  const double v = sparse_kernel(0.2 - 1e-9, 0.2, 50.0);
  EXPECT_GE(v, 0.0);
  EXPECT_LT(v, 50.0);
}

TEST(SparseKernel, MonotoneAndBounded) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20000; ++i) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    const double ka = sparse_kernel(a, 1.0, 2.0), kb = sparse_kernel(b, 1.0, 2.0);
    ASSERT_GE(ka, kb);
    ASSERT_LE(ka, 2.0);
    ASSERT_GE(kb, 0.0);
  }
}

TEST(SparseKernel, ContinuousAtSupportEdge) {
  const double l = 0.2, sigma = 50.0;
  EXPECT_LT(std::abs(sparse_kernel(l - 1e-6, l, sigma)), 1e-4 * sigma);
}

TEST(SparseKernel, LinearInSigma) {
  for (double d : {0.0, 0.05, 0.11, 0.19}) {
    EXPECT_NEAR(sparse_kernel(d, 0.2, 7.0), 7.0 * sparse_kernel(d, 0.2, 1.0), 1e-13);
  }
}

TEST(SparseKernel, LongDoubleInstantiation) {
  EXPECT_NEAR(static_cast<double>(sparse_kernel(0.05L, 0.2L, 1.0L)), sparse_kernel(0.05, 0.2, 1.0), 1e-15);
}

TEST(Weights, Roles) {
  KernelParams p;
  const Vec3 a(0.1, 0.2, 0.3), b(0.15, 0.2, 0.3);
  EXPECT_DOUBLE_EQ(spatial_weight(a, a, p), p.sigma_s);
  EXPECT_EQ(spatial_weight(a, a + Vec3(p.l_s, 0, 0), p), 0.0);
  EXPECT_DOUBLE_EQ(spatial_weight(a, b, p), spatial_weight(b, a, p));
  EXPECT_DOUBLE_EQ(flow_weight(a, a, p), 50.0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 c = a + Vec3(0.003 * i, 0, 0);
    EXPECT_EQ(flow_weight(a, c, p), flow_weight_free(a, c, p));
  }
  p.l_free = 0.5;
  EXPECT_GT(flow_weight_free(a, a + Vec3(0.3, 0, 0), p), 0.0);
  EXPECT_EQ(flow_weight(a, a + Vec3(0.3, 0, 0), p), 0.0);
}
