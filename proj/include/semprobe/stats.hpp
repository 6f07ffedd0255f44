#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "semprobe/linalg.hpp"

namespace semprobe {

struct PcaOptions {
  std::size_t max_iters = 1000;
  double tol = 1e-9;
};

struct PcaResult {
  Vector component;  // unit norm, largest-magnitude entry non-negative
  double explained_variance = 0.0;
  Vector mean;
  std::size_t iterations = 0;
};

/// Dominant eigenvector of the sample covariance (divisor m-1) by power
/// iteration. Rows of `points` are the samples. Throws DegeneratePoints when
/// every point lies within 1e-12 of the centroid.
PcaResult pca_first_component(const Matrix& points, PcaOptions options = {});

/// Angle in degrees between the lines spanned by u and v, in [0, 90].
double absolute_angle(std::span<const double> u, std::span<const double> v);

/// Shannon entropy (nats) of a histogram on the fixed lattice
/// [j*w, (j+1)*w). Returns 0 for a single occupied bin.
double histogram_entropy(std::span<const double> values, double bin_width = 0.05);

/// Average (fractional) ranks, 1-based; ties share the mean of their ranks.
std::vector<double> fractional_ranks(std::span<const double> values);

/// Pearson correlation of fractional ranks. Throws ConstantInput when either
/// side has zero rank variance.
double spearman_rho(std::span<const double> a, std::span<const double> b);

/// Type-7 (linear interpolation) sample quantile, p in [0, 1].
double quantile(std::span<const double> values, double p);

struct Projection2d {
  Vector mean;
  Vector axis1;
  Vector axis2;
  std::vector<std::array<double, 2>> coords;
};

/// Fits the top two principal axes on `basis_fit` (second axis by deflation)
/// and projects `points` onto them. Rank-1 fits get an arbitrary orthogonal
/// second axis, so collinear data projects with a zero second coordinate.
Projection2d project_2d(const Matrix& points, const Matrix& basis_fit,
                        PcaOptions options = {});

}  // namespace semprobe
