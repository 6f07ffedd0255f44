#include "semprobe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>

#include "semprobe/errors.hpp"

namespace semprobe {

namespace {

constexpr double kDegenerate = 1e-12;

Vector column_mean(const Matrix& points) {
  Vector mean(points.cols(), 0.0);
  for (std::size_t r = 0; r < points.rows(); ++r) axpy(1.0, points.row(r), mean);
  for (double& v : mean) v /= static_cast<double>(points.rows());
  return mean;
}

Matrix centered(const Matrix& points, const Vector& mean) {
  Matrix out = points;
  for (std::size_t r = 0; r < out.rows(); ++r) axpy(-1.0, mean, out.row(r));
  return out;
}

double max_row_norm(const Matrix& m) {
  double best = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) best = std::max(best, norm(m.row(r)));
  return best;
}

void normalize_sign(Vector& v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  if (v[arg] < 0.0)
    for (double& x : v) x = -x;
}

// y = Xc^T (Xc v)
Vector covariance_apply(const Matrix& xc, const Vector& v) {
  Vector out(xc.cols(), 0.0);
  for (std::size_t r = 0; r < xc.rows(); ++r) {
    const auto row = xc.row(r);
    axpy(dot(row, v), row, out);
  }
  return out;
}

struct Direction {
  Vector v;
  double variance;
  std::size_t iterations;
};

// Power iteration on the implicit covariance of already-centred rows.
// Returns nullopt when the rows carry no variance above `floor`.
std::optional<Direction> dominant_direction(const Matrix& xc, const PcaOptions& options,
                                            double floor) {
  std::size_t start = 0;
  double start_norm = 0.0;
  for (std::size_t r = 0; r < xc.rows(); ++r) {
    const double n = norm(xc.row(r));
    if (n > start_norm) {
      start_norm = n;
      start = r;
    }
  }
  if (!(start_norm > floor)) return std::nullopt;

  Vector v(xc.row(start).begin(), xc.row(start).end());
  for (double& x : v) x /= start_norm;

  std::size_t it = 0;
  for (; it < options.max_iters; ++it) {
    Vector next = covariance_apply(xc, v);
    const double n = norm(next);
    if (!(n > 0.0)) break;
    for (double& x : next) x /= n;
    double change = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) change += (next[i] - v[i]) * (next[i] - v[i]);
    v = std::move(next);
    if (std::sqrt(change) < options.tol) {
      ++it;
      break;
    }
  }
  normalize_sign(v);
  const double denom = static_cast<double>(xc.rows() - 1);
  const double variance = dot(v, covariance_apply(xc, v)) / denom;
  return Direction{std::move(v), variance, it};
}

}  // namespace

PcaResult pca_first_component(const Matrix& points, PcaOptions options) {
  if (points.rows() < 2) throw Error(ErrorCode::DegeneratePoints, "PCA needs at least two points");
  PcaResult result;
  result.mean = column_mean(points);
  const Matrix xc = centered(points, result.mean);
  auto dir = dominant_direction(xc, options, kDegenerate);
  if (!dir) throw Error(ErrorCode::DegeneratePoints, "all points coincide with their centroid");
  result.component = std::move(dir->v);
  result.explained_variance = std::max(0.0, dir->variance);
  result.iterations = dir->iterations;
  return result;
}

double absolute_angle(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(ErrorCode::ShapeMismatch, "angle between vectors of different length");
  const double nu = norm(u), nv = norm(v);
  if (!(nu > kDegenerate) || !(nv > kDegenerate))
    throw Error(ErrorCode::ZeroVector, "angle with a zero vector is undefined");
  const double c = std::clamp(std::abs(dot(u, v)) / (nu * nv), 0.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double histogram_entropy(std::span<const double> values, double bin_width) {
  if (values.empty()) throw Error(ErrorCode::ShapeMismatch, "entropy of an empty sample");
  if (!(bin_width > 0.0)) throw Error(ErrorCode::ConfigInvalid, "bin width must be positive");
  std::map<long long, std::size_t> counts;
  for (double v : values) ++counts[static_cast<long long>(std::floor(v / bin_width))];
  const double total = static_cast<double>(values.size());
  double h = 0.0;
  for (const auto& [bin, count] : counts) {
    const double p = static_cast<double>(count) / total;
    h -= p * std::log(p);
  }
  return std::max(0.0, h);
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw Error(ErrorCode::ShapeMismatch, "spearman needs two equal-length samples of size >= 2");
  const auto ra = fractional_ranks(a);
  const auto rb = fractional_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;  // ranks always average to (n+1)/2
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean, db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0)
    throw Error(ErrorCode::ConstantInput, "spearman correlation of a constant sequence");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::ShapeMismatch, "quantile of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Projection2d project_2d(const Matrix& points, const Matrix& basis_fit, PcaOptions options) {
  if (basis_fit.rows() < 2) throw Error(ErrorCode::DegeneratePoints, "projection basis needs >= 2 points");
  if (points.cols() != basis_fit.cols())
    throw Error(ErrorCode::ShapeMismatch, "projected points and basis differ in dimensionality");

  Projection2d out;
  out.mean = column_mean(basis_fit);
  Matrix xc = centered(basis_fit, out.mean);
  const double scale = max_row_norm(xc);
  auto first = dominant_direction(xc, options, kDegenerate);
  if (!first) throw Error(ErrorCode::DegeneratePoints, "projection basis points coincide");
  out.axis1 = first->v;

  for (std::size_t r = 0; r < xc.rows(); ++r) {
    auto row = xc.row(r);
    axpy(-dot(row, out.axis1), out.axis1, row);
  }
  auto second = dominant_direction(xc, options, std::max(kDegenerate, 1e-9 * scale));
  if (second) {
    out.axis2 = second->v;
    // Re-orthogonalise against round-off leaking back from the first axis.
    axpy(-dot(out.axis2, out.axis1), out.axis1, out.axis2);
    const double n = norm(out.axis2);
    for (double& x : out.axis2) x /= n;
  } else {
    // Rank-1 basis: any unit vector orthogonal to axis1 will do.
    std::size_t least = 0;
    for (std::size_t i = 1; i < out.axis1.size(); ++i)
      if (std::abs(out.axis1[i]) < std::abs(out.axis1[least])) least = i;
    out.axis2.assign(out.axis1.size(), 0.0);
    if (out.axis1.size() > 1) {
      out.axis2[least] = 1.0;
      axpy(-out.axis1[least], out.axis1, out.axis2);
      const double n = norm(out.axis2);
      for (double& x : out.axis2) x /= n;
    }
    normalize_sign(out.axis2);
  }

  out.coords.reserve(points.rows());
  for (std::size_t r = 0; r < points.rows(); ++r) {
    const Vector d = subtract(points.row(r), out.mean);
    out.coords.push_back({dot(d, out.axis1), dot(d, out.axis2)});
  }
  return out;
}

}  // namespace semprobe
