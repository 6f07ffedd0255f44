#include "semprobe/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "semprobe/errors.hpp"

namespace semprobe {

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols())
      throw Error(ErrorCode::ShapeMismatch, "ragged rows in matrix construction");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  const std::size_t n = x.size();
  const double* xp = x.data();
  double* yp = y.data();
  for (std::size_t i = 0; i < n; ++i) yp[i] += alpha * xp[i];
}

Vector subtract(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  return dot(a, b) / (norm(a) * norm(b));
}

void affine_rows(const Matrix& in, const Matrix& weights_t,
                 std::span<const double> bias, Matrix& out) {
  const std::size_t batch = in.rows();
  const std::size_t in_dim = weights_t.rows();
  const std::size_t out_dim = weights_t.cols();
  assert(in.cols() == in_dim && bias.size() == out_dim);
  if (out.rows() != batch || out.cols() != out_dim) out = Matrix(batch, out_dim);
  for (std::size_t b = 0; b < batch; ++b) {
    auto dst = out.row(b);
    std::copy(bias.begin(), bias.end(), dst.begin());
    const auto src = in.row(b);
    for (std::size_t i = 0; i < in_dim; ++i) axpy(src[i], weights_t.row(i), dst);
  }
}

}  // namespace semprobe
