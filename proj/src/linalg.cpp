#include "lsq/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lsq/errors.hpp"

namespace lsq {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) throw DimensionMismatch("matvec: size mismatch");
  Vector out(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* row = a.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) s += row[c] * x[c];
    out[r] = s;
  }
  return out;
}

SpdFactor factor_spd(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("factor_spd: matrix not square");
  const std::size_t n = a.rows();
  if (n == 0) throw DimensionMismatch("factor_spd: empty matrix");

  double diag_scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag_scale = std::max(diag_scale, std::abs(a(i, i)));
  const double pivot_floor = diag_scale * 1e-13 + std::numeric_limits<double>::min();

  Matrix l(n, n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= pivot_floor) throw NotPositiveDefinite("factor_spd: pivot " + std::to_string(j) + " not positive");
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }

  double dmin = l(0, 0);
  double dmax = l(0, 0);
  for (std::size_t j = 1; j < n; ++j) {
    dmin = std::min(dmin, l(j, j));
    dmax = std::max(dmax, l(j, j));
  }
  SpdFactor f;
  f.dimension = n;
  f.factor_data = std::move(l);
  f.log_condition_estimate = 2.0 * (std::log(dmax) - std::log(dmin));
  return f;
}

Vector solve_spd(const SpdFactor& factor, const Vector& b) {
  const std::size_t n = factor.dimension;
  if (b.size() != n) throw DimensionMismatch("solve_spd: rhs size mismatch");
  const Matrix& l = factor.factor_data;

  Vector z(b);
  for (std::size_t i = 0; i < n; ++i) {
    double s = z[i];
    const double* row = l.row(i);
    for (std::size_t k = 0; k < i; ++k) s -= row[k] * z[k];
    z[i] = s / row[i];
  }
  for (std::size_t ri = n; ri-- > 0;) {
    double s = z[ri];
    for (std::size_t k = ri + 1; k < n; ++k) s -= l(k, ri) * z[k];
    z[ri] = s / l(ri, ri);
  }
  return z;
}

Matrix inverse_spd(const SpdFactor& factor) {
  const std::size_t n = factor.dimension;
  Matrix inv(n, n, 0.0);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    Vector col = solve_spd(factor, e);
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  // Symmetrize to wash out the last bit of asymmetry from column solves.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = v;
      inv(j, i) = v;
    }
  return inv;
}

void downdate_inverse_in_place(Matrix& inv_state, const Vector& x) {
  const std::size_t n = inv_state.rows();
  if (inv_state.cols() != n) throw DimensionMismatch("downdate_inverse: state not square");
  if (x.size() != n) throw DimensionMismatch("downdate_inverse: vector size mismatch");

  Vector u = matvec(inv_state, x);
  const double denom = 1.0 - dot(x, u);
  if (denom <= kDowndateTolerance) throw RankCollapse("downdate_inverse: removal makes state singular");

  const double scale = 1.0 / denom;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = inv_state.row(i);
    const double ui = u[i] * scale;
    for (std::size_t j = 0; j < n; ++j) row[j] += ui * u[j];
  }
}

Matrix downdate_inverse(const Matrix& inv_state, const Vector& x) {
  Matrix out = inv_state;
  downdate_inverse_in_place(out, x);
  return out;
}

}  // namespace lsq
