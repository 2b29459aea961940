#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "mfgrow/tensor.hpp"

using namespace mfgrow;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian(0.0, 1.0);
  return m;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(Matvec, Identity) {
  const Matrix id = Matrix::Identity(3, 3);
  Vector x(3);
  x << 1, 2, 3;
  EXPECT_EQ(matvec(id, x), x);
}

TEST(Matvec, ZeroMatrix) {
  const Matrix z = Matrix::Zero(2, 4);
  Vector x(4);
  x << 5, -1, 2, 7;
  const Vector y = matvec(z, x);
  ASSERT_EQ(y.size(), 2);
  EXPECT_EQ(y(0), 0.0);
  EXPECT_EQ(y(1), 0.0);
}

TEST(Matvec, TripleLoopOracleBitExact) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix m = random_matrix(5, 5, Rng(seed).substream("m"));
    const Vector x = random_matrix(5, 1, Rng(seed).substream("x"));
    const Vector y = matvec(m, x);
    for (int i = 0; i < 5; ++i) {
      double acc = 0.0;
      for (int k = 0; k < 5; ++k) acc += m(i, k) * x(k);
      EXPECT_TRUE(bit_equal(acc, y(i)));
    }
  }
}

TEST(Matmul, TripleLoopOracleBitExact) {
  const Matrix a = random_matrix(7, 13, Rng(1));
  const Matrix b = random_matrix(13, 4, Rng(2));
  const Matrix c = matmul(a, b);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 13; ++k) acc += a(i, k) * b(k, j);
      EXPECT_TRUE(bit_equal(acc, c(i, j))) << i << "," << j;
    }
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Matrix::Zero(2, 3), Matrix::Zero(2, 3)), DimensionError);
  EXPECT_THROW(matvec(Matrix::Zero(2, 3), Vector::Zero(2)), DimensionError);
}

TEST(Matmul, PropagatesNaN) {
  Matrix a = Matrix::Zero(1, 2);
  Matrix b = Matrix::Ones(2, 1);
  b(1, 0) = std::nan("");
  EXPECT_TRUE(std::isnan(matmul(a, b)(0, 0)));
}

TEST(Sample, Constant) {
  Rng rng(0);
  const Vector v = sample(rng, DistributionSpec::constant(1.0), 4);
  EXPECT_EQ(v, Vector::Ones(4));
}

TEST(Sample, GaussianMoments) {
  Rng rng(42);
  const Vector v = sample(rng, DistributionSpec::gaussian(1.0, 3.0), 100000);
  EXPECT_NEAR(mean(v), 1.0, 0.05);
  EXPECT_NEAR(stddev(v), 3.0, 0.05);
}

TEST(Sample, UniformMean) {
  Rng rng(7);
  const Vector v = sample(rng, DistributionSpec::uniform(-1.0, 1.0), 100000);
  EXPECT_NEAR(mean(v), 0.0, 0.02);
  EXPECT_GE(v.minCoeff(), -1.0);
  EXPECT_LT(v.maxCoeff(), 1.0);
}

TEST(Sample, InvalidParameters) {
  Rng rng(0);
  EXPECT_THROW(sample(rng, DistributionSpec::uniform(1.0, 0.5), 3), ParameterError);
  EXPECT_THROW(sample(rng, DistributionSpec::gaussian(0.0, -1.0), 3), ParameterError);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SubstreamsAreIndependentOfDrawOrder) {
  const Rng root(3);
  Rng a1 = root.substream("a");
  Rng b1 = root.substream("b");
  const double a_first = a1.uniform01();
  const double b_first = b1.uniform01();
  Rng b2 = root.substream("b");
  Rng a2 = root.substream("a");
  EXPECT_EQ(b2.uniform01(), b_first);
  EXPECT_EQ(a2.uniform01(), a_first);
  EXPECT_NE(a_first, b_first);
}

TEST(Rng, IndexInRangeAndRoughlyUniform) {
  Rng rng(11);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto k = rng.index(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  EXPECT_THROW(rng.index(0), ParameterError);
}
