#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "semprobe/errors.hpp"
#include "semprobe/stats.hpp"
#include "test_support.hpp"

using namespace semprobe;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::Io;
}

// Rank by counting: rank(x_i) = #{x_j < x_i} + (#{x_j == x_i} + 1) / 2
std::vector<double> naive_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double y : x) {
      if (y < x[i]) ++less;
      if (y == x[i]) ++equal;
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

double naive_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = naive_ranks(a), rb = naive_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Pca, AxisAlignedLine) {
  const auto r = pca_first_component(Matrix::from_rows({{0, 0}, {1, 0}, {2, 0}, {3, 0}}));
  EXPECT_NEAR(r.component[0], 1.0, 1e-12);
  EXPECT_NEAR(r.component[1], 0.0, 1e-12);
  EXPECT_NEAR(r.explained_variance, 5.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.mean[0], 1.5, 1e-15);
}

TEST(Pca, DiagonalLine) {
  const auto r = pca_first_component(Matrix::from_rows({{-1, -1}, {0.5, 0.5}, {2, 2}, {3, 3}}));
  EXPECT_NEAR(r.component[0], 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(r.component[1], 1.0 / std::sqrt(2.0), 1e-9);
}

TEST(Pca, IdenticalPointsAreDegenerate) {
  EXPECT_EQ(code_of([] { pca_first_component(Matrix::from_rows({{1, 2}, {1, 2}, {1, 2}})); }),
            ErrorCode::DegeneratePoints);
}

TEST(Pca, SignConvention) {
  const auto r = pca_first_component(Matrix::from_rows({{0, 0}, {-1, -3}, {1, 3}, {0.2, 0.5}}));
  const auto big = std::max_element(r.component.begin(), r.component.end(),
                                     [](double a, double b) { return std::abs(a) < std::abs(b); });
  EXPECT_GE(*big, 0.0);
  EXPECT_NEAR(norm(r.component), 1.0, 1e-9);
}

TEST(Pca, MatchesDenseEigendecomposition) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 9, m = n + 2 + rng() % 30;
    // anisotropic cloud so the top eigenvalue is separated
    Matrix pts = fixture::random_matrix(m, n, rng);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c) pts(r, c) *= 1.0 + 2.0 * static_cast<double>(n - c);
    Eigen::MatrixXd X(m, n);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c) X(r, c) = pts(r, c);
    const Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(m - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd top = es.eigenvectors().col(n - 1);

    const auto r = pca_first_component(pts);
    double cos = 0.0;
    for (std::size_t i = 0; i < n; ++i) cos += r.component[i] * top(i);
    EXPECT_GT(std::abs(cos), 0.999) << "trial " << trial;
    EXPECT_NEAR(r.explained_variance, es.eigenvalues()(n - 1), 1e-6 * es.eigenvalues()(n - 1));

    // no random direction explains more variance
    for (int d = 0; d < 5; ++d) {
      Matrix dir = fixture::random_matrix(1, n, rng);
      Eigen::VectorXd u(n);
      for (std::size_t i = 0; i < n; ++i) u(i) = dir(0, i);
      u.normalize();
      EXPECT_LE(u.dot(cov * u), r.explained_variance * (1.0 + 1e-9));
    }
  }
}

TEST(AbsoluteAngle, Examples) {
  EXPECT_NEAR(absolute_angle(Vector{1, 0}, Vector{0, 1}), 90.0, 1e-12);
  EXPECT_NEAR(absolute_angle(Vector{1, 0}, Vector{-1, 0}), 0.0, 1e-12);
  EXPECT_NEAR(absolute_angle(Vector{1, 0}, Vector{1, 1}), 45.0, 1e-12);
  EXPECT_EQ(code_of([] { absolute_angle(Vector{0, 0}, Vector{1, 1}); }), ErrorCode::ZeroVector);
}

TEST(AbsoluteAngle, SymmetricAndSignBlind) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const Matrix m = fixture::random_matrix(2, 5, rng);
    Vector u(m.row(0).begin(), m.row(0).end()), v(m.row(1).begin(), m.row(1).end());
    Vector neg_u = u;
    for (double& x : neg_u) x = -x;
    const double a = absolute_angle(u, v);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 90.0);
    EXPECT_NEAR(a, absolute_angle(v, u), 1e-12);
    EXPECT_NEAR(a, absolute_angle(neg_u, v), 1e-12);
  }
}

TEST(HistogramEntropy, Examples) {
  EXPECT_EQ(histogram_entropy(Vector(10, 0.3)), 0.0);
  EXPECT_EQ(histogram_entropy(Vector{0.01, 0.02}, 0.05), 0.0);
  Vector spread;
  for (int i = 0; i < 100; ++i) spread.push_back(0.05 * i + 0.025);
  EXPECT_NEAR(histogram_entropy(spread), std::log(100.0), 1e-12);
  EXPECT_EQ(histogram_entropy(Vector{7.0}), 0.0);
}

TEST(HistogramEntropy, LatticeIsGlobal) {
  // -0.01 and 0.01 straddle the lattice point 0
  EXPECT_NEAR(histogram_entropy(Vector{-0.01, 0.01}), std::log(2.0), 1e-12);
}

TEST(HistogramEntropy, PermutationAndLatticeTranslationInvariant) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 50; ++t) {
    Vector v(40);
    // centres of lattice cells, so a shift by whole cells cannot move a value across an edge
    for (double& x : v) x = (std::floor(u(rng) / 0.05) + 0.5) * 0.05;
    const double h = histogram_entropy(v);
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_NEAR(histogram_entropy(v), h, 1e-12);
    for (double& x : v) x += 0.05 * 7;
    EXPECT_NEAR(histogram_entropy(v), h, 1e-12);
  }
}

TEST(Spearman, Examples) {
  EXPECT_NEAR(spearman_rho(Vector{1, 2, 3}, Vector{10, 20, 30}), 1.0, 1e-15);
  EXPECT_NEAR(spearman_rho(Vector{1, 2, 3}, Vector{3, 2, 1}), -1.0, 1e-15);
  const Vector a{1, 2, 2, 3}, b{1, 3, 2, 4};
  EXPECT_NEAR(spearman_rho(a, b), naive_spearman(a, b), 1e-15);
  EXPECT_EQ(code_of([] { spearman_rho(Vector{1, 1, 1}, Vector{1, 2, 3}); }), ErrorCode::ConstantInput);
}

TEST(Spearman, MatchesNaiveOracle) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng() % 60;
    const bool ties = t % 2 == 0;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = ties ? static_cast<double>(rng() % 5) : std::normal_distribution<double>()(rng);
      b[i] = ties ? static_cast<double>(rng() % 4) : std::normal_distribution<double>()(rng);
    }
    const auto nra = naive_ranks(a), nrb = naive_ranks(b);
    if (std::adjacent_find(nra.begin(), nra.end(), std::not_equal_to<>()) == nra.end() ||
        std::adjacent_find(nrb.begin(), nrb.end(), std::not_equal_to<>()) == nrb.end()) {
      EXPECT_THROW(spearman_rho(a, b), Error);
      continue;
    }
    EXPECT_EQ(fractional_ranks(a), nra);
    EXPECT_NEAR(spearman_rho(a, b), naive_spearman(a, b), 1e-12);
  }
}

TEST(Spearman, SelfAndNegation) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    Vector a(30);
    for (double& x : a) x = std::normal_distribution<double>()(rng);
    Vector neg = a;
    for (double& x : neg) x = -x;
    EXPECT_NEAR(spearman_rho(a, a), 1.0, 1e-12);
    EXPECT_NEAR(spearman_rho(a, neg), -1.0, 1e-12);
  }
}

TEST(Quantile, TypeSeven) {
  const Vector v{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
}

TEST(Project2d, PlanarPointsKeepDistances) {
  std::mt19937_64 rng(6);
  Matrix pts(20, 3);
  for (std::size_t r = 0; r < 20; ++r) {
    pts(r, 0) = std::normal_distribution<double>(0, 3)(rng);
    pts(r, 1) = std::normal_distribution<double>(0, 1)(rng);
  }
  const auto p = project_2d(pts, pts);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j) {
      const double hd = norm(subtract(pts.row(i), pts.row(j)));
      const double dx = p.coords[i][0] - p.coords[j][0], dy = p.coords[i][1] - p.coords[j][1];
      EXPECT_NEAR(std::hypot(dx, dy), hd, 1e-6);
    }
}

TEST(Project2d, CollinearHasZeroSecondCoordinate) {
  const Matrix pts = Matrix::from_rows({{0, 0, 0}, {1, 2, 3}, {2, 4, 6}, {-1, -2, -3}});
  const auto p = project_2d(pts, pts);
  for (const auto& c : p.coords) EXPECT_NEAR(c[1], 0.0, 1e-9);
  EXPECT_NEAR(dot(p.axis1, p.axis2), 0.0, 1e-12);
}

TEST(Project2d, CentroidProjectsToOrigin) {
  const Matrix fit = Matrix::from_rows({{0, 0}, {2, 0}, {0, 1}, {2, 1}});
  const auto p = project_2d(Matrix::from_rows({{1, 0.5}}), fit);
  EXPECT_NEAR(p.coords[0][0], 0.0, 1e-12);
  EXPECT_NEAR(p.coords[0][1], 0.0, 1e-12);
}

TEST(Project2d, DegenerateFit) {
  EXPECT_EQ(code_of([] {
              const Matrix same = Matrix::from_rows({{1, 1}, {1, 1}});
              project_2d(same, same);
            }),
            ErrorCode::DegeneratePoints);
}
