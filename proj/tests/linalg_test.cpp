#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "semprobe/linalg.hpp"
#include "test_support.hpp"

using namespace semprobe;

TEST(Linalg, AffineRowsMatchesNaiveProduct) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t b = 1 + rng() % 7, in = 1 + rng() % 9, out = 1 + rng() % 5;
    const Matrix x = fixture::random_matrix(b, in, rng);
    const Matrix w = fixture::random_matrix(out, in, rng);
    Vector bias(out);
    for (double& v : bias) v = std::normal_distribution<double>()(rng);
    Matrix got;
    affine_rows(x, w.transposed(), bias, got);
    ASSERT_EQ(got.rows(), b);
    ASSERT_EQ(got.cols(), out);
    for (std::size_t r = 0; r < b; ++r)
      for (std::size_t o = 0; o < out; ++o) {
        double want = bias[o];
        for (std::size_t i = 0; i < in; ++i) want += x(r, i) * w(o, i);
        EXPECT_NEAR(got(r, o), want, 1e-12);
      }
  }
}

TEST(Linalg, AffineRowsPropagatesNan) {
  Matrix x(1, 2);
  x(0, 0) = std::numeric_limits<double>::quiet_NaN();
  Matrix wt(2, 1);  // zero weights
  Matrix out;
  affine_rows(x, wt, Vector{0.0}, out);
  EXPECT_TRUE(std::isnan(out(0, 0)));
}

TEST(Linalg, TransposeAndFromRows) {
  const Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  const Matrix t = m.transposed();
  ASSERT_EQ(t.rows(), 3u);
  ASSERT_EQ(t.cols(), 2u);
  EXPECT_EQ(t(2, 1), 6.0);
  EXPECT_EQ(t(0, 1), 4.0);
}

TEST(Linalg, VectorHelpers) {
  const Vector a{3, 4}, b{1, 0};
  EXPECT_DOUBLE_EQ(norm(a), 5.0);
  EXPECT_DOUBLE_EQ(dot(a, b), 3.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(a, b), 0.6);
  Vector y{1, 1};
  axpy(2.0, a, y);
  EXPECT_EQ(y, (Vector{7, 9}));
  EXPECT_EQ(subtract(a, b), (Vector{2, 4}));
}
