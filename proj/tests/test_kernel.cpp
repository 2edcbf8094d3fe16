#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace nnkm;
using nnkm::testing::random_features;
using nnkm::testing::random_matrix;

TEST(KernelEval, GaussianSelfSimilarityIsOne) {
  Vector x(3);
  x << 0.3, -1.2, 4.0;
  EXPECT_EQ(kernel_eval(x, x, KernelSpec::gaussian()), 1.0);
}

TEST(KernelEval, GaussianAtSquaredDistanceTwo) {
  Vector x(2), y(2);
  x << 1.0, 0.0;
  y << 0.0, 1.0;
  EXPECT_NEAR(kernel_eval(x, y, KernelSpec::gaussian(1.0)), 0.3678794411714423, 1e-15);
}

TEST(KernelEval, GaussianBandwidthScalesDistance) {
  Vector x(1), y(1);
  x << 0.0;
  y << 2.0;
  EXPECT_NEAR(kernel_eval(x, y, KernelSpec::gaussian(2.0)), std::exp(-0.5), 1e-15);
}

TEST(KernelEval, CosineOrthogonalIsZero) {
  Vector x(2), y(2);
  x << 2.0, 0.0;
  y << 0.0, -3.0;
  EXPECT_EQ(kernel_eval(x, y, KernelSpec::cosine()), 0.0);
  EXPECT_NEAR(kernel_eval(x, x, KernelSpec::cosine()), 1.0, 1e-15);
}

TEST(KernelEval, LinearIsDotProduct) {
  Vector x(3), y(3);
  x << 1, 2, 3;
  y << -1, 0.5, 2;
  EXPECT_EQ(kernel_eval(x, y, KernelSpec::linear()), 6.0);
}

TEST(KernelEval, CosineRejectsZeroVector) {
  Vector x = Vector::Zero(3), y = Vector::Ones(3);
  EXPECT_THROW(kernel_eval(x, y, KernelSpec::cosine()), Error);
  EXPECT_THROW(kernel_eval(y, x, KernelSpec::cosine()), Error);
}

TEST(KernelEval, DimensionMismatchThrows) {
  EXPECT_THROW(kernel_eval(Vector::Ones(2), Vector::Ones(3), KernelSpec::linear()), Error);
}

TEST(KernelEval, BadSigmaRejected) {
  EXPECT_THROW(kernel_eval(Vector::Ones(2), Vector::Ones(2), KernelSpec::gaussian(0.0)), Error);
  EXPECT_THROW(kernel_eval(Vector::Ones(2), Vector::Ones(2), KernelSpec::gaussian(-1.0)), Error);
}

TEST(KernelEval, SymmetricBitwiseForAllKinds) {
  Rng rng(11);
  for (const KernelSpec spec : {KernelSpec::gaussian(0.7), KernelSpec::cosine(), KernelSpec::linear()}) {
    for (int t = 0; t < 200; ++t) {
      const Matrix xy = random_matrix(7, 2, rng);
      const double a = kernel_eval(xy.col(0), xy.col(1), spec);
      const double b = kernel_eval(xy.col(1), xy.col(0), spec);
      EXPECT_EQ(a, b);
    }
  }
}

TEST(KernelEval, GaussianBounds) {
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    const Matrix xy = random_matrix(4, 2, rng);
    const double k = kernel_eval(xy.col(0), xy.col(1), KernelSpec::gaussian(1.5));
    EXPECT_GT(k, 0.0);
    EXPECT_LT(k, 1.0);
  }
}

TEST(KernelSpecParse, Grammar) {
  EXPECT_EQ(KernelSpec::parse("gaussian:sigma=2.5"), KernelSpec::gaussian(2.5));
  EXPECT_EQ(KernelSpec::parse("gaussian"), KernelSpec::gaussian(1.0));
  EXPECT_EQ(KernelSpec::parse("cosine"), KernelSpec::cosine());
  EXPECT_EQ(KernelSpec::parse("linear"), KernelSpec::linear());
  for (const char* bad : {"rbf", "gaussian:sigma=", "gaussian:sigma=abc", "gaussian:sigma=-1",
                          "gaussian:bw=1", "linear:sigma=1", ""}) {
    EXPECT_THROW(KernelSpec::parse(bad), Error) << bad;
  }
}

TEST(KernelSpecParse, ToStringRoundTrips) {
  for (const KernelSpec spec : {KernelSpec::gaussian(0.1), KernelSpec::gaussian(1.0 / 3.0),
                                KernelSpec::cosine(), KernelSpec::linear()}) {
    EXPECT_EQ(KernelSpec::parse(spec.to_string()), spec) << spec.to_string();
  }
}

TEST(CrossSimilarity, SinglePointGaussian) {
  Matrix p(2, 1);
  p << 0.5, -0.5;
  const Matrix k = cross_similarity(p, p, KernelSpec::gaussian());
  ASSERT_EQ(k.rows(), 1);
  ASSERT_EQ(k.cols(), 1);
  EXPECT_EQ(k(0, 0), 1.0);
}

TEST(CrossSimilarity, LinearIsMatrixProduct) {
  Rng rng(3);
  const Matrix q = random_matrix(4, 5, rng);
  const Matrix s = random_matrix(4, 3, rng);
  const Matrix k = cross_similarity(q, s, KernelSpec::linear());
  const Matrix expected = q.transpose() * s;
  EXPECT_LE((k - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CrossSimilarity, MatchesScalarLoop) {
  Rng rng(4);
  for (const KernelSpec spec : {KernelSpec::gaussian(0.8), KernelSpec::cosine(), KernelSpec::linear()}) {
    const Matrix q = random_matrix(3, 5, rng);
    const Matrix s = random_matrix(3, 4, rng);
    const Matrix k = cross_similarity(q, s, spec);
    ASSERT_EQ(k.rows(), 5);
    ASSERT_EQ(k.cols(), 4);
    for (Eigen::Index i = 0; i < 5; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) EXPECT_NEAR(k(i, j), kernel_eval(q.col(i), s.col(j), spec), 1e-12);
    }
  }
}

TEST(CrossSimilarity, DimensionMismatchThrows) {
  EXPECT_THROW(cross_similarity(Matrix::Ones(2, 3), Matrix::Ones(3, 3), KernelSpec::linear()), Error);
}

TEST(Gram, SingleSample) {
  const FeatureMatrix f = random_features(3, 1, 1);
  const GramView g = gram(f, KernelSpec::gaussian());
  EXPECT_EQ(g.size(), 1);
  EXPECT_EQ(g(0, 0), 1.0);
}

TEST(Gram, DuplicateColumnsGiveIdenticalRows) {
  FeatureMatrix f = random_features(3, 5, 2);
  f.data.col(3) = f.data.col(1);
  const GramView g = gram(f, KernelSpec::gaussian(0.9));
  EXPECT_EQ(g.row(1), g.row(3));
}

TEST(Gram, MatchesCrossSimilarityAndIsSymmetric) {
  const FeatureMatrix f = random_features(4, 6, 3);
  for (const KernelSpec spec : {KernelSpec::gaussian(), KernelSpec::cosine(), KernelSpec::linear()}) {
    const GramView g = gram(f, spec);
    const Matrix c = cross_similarity(f.data, f.data, spec);
    EXPECT_LE((g.matrix() - c).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(g.matrix(), g.matrix().transpose());
  }
}

TEST(Gram, PositiveSemidefinite) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FeatureMatrix f = random_features(3, 2 + static_cast<Eigen::Index>(seed % 19), seed);
    for (const KernelSpec spec : {KernelSpec::gaussian(0.6), KernelSpec::linear()}) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(gram(f, spec).matrix());
      EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-8);
    }
  }
}

TEST(Gram, CapExceededPointsToOnTheFly) {
  const FeatureMatrix f = random_features(2, 10, 4);
  try {
    gram(f, KernelSpec::gaussian(), 5);
    FAIL() << "expected cap error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("on-the-fly"), std::string::npos);
  }
}

TEST(Gram, OnTheFlyAgreesWithCache) {
  const FeatureMatrix f = random_features(3, 12, 5);
  const KernelSpec spec = KernelSpec::gaussian(1.3);
  const GramView cached = GramView::cached(f.data, spec);
  const GramView lazy = GramView::on_the_fly(f.data, spec);
  EXPECT_FALSE(lazy.is_cached());
  EXPECT_EQ(cached.diagonal(), lazy.diagonal());
  for (Eigen::Index i = 0; i < 12; ++i) EXPECT_EQ(cached.row(i), lazy.row(i));
  const Matrix rhs = Matrix::Identity(12, 3);
  EXPECT_LE((cached.times(rhs) - lazy.times(rhs)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_FALSE(GramView::automatic(f.data, spec, 11).is_cached());
  EXPECT_TRUE(GramView::automatic(f.data, spec, 12).is_cached());
}
