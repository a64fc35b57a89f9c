#pragma once

#include <cstddef>
#include <vector>

namespace lsq {

using Vector = std::vector<double>;

// Dense row-major matrix with value semantics.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(const Vector& a, const Vector& b);
Vector matvec(const Matrix& a, const Vector& x);

// Lower-triangular Cholesky factor L of a symmetric positive definite A,
// so A = L * L^T. log_condition_estimate is log(max_j L_jj^2 / min_j L_jj^2),
// a cheap proxy for the log condition number of A.
struct SpdFactor {
  std::size_t dimension = 0;
  Matrix factor_data;
  double log_condition_estimate = 0.0;
};

// Throws NotPositiveDefinite when a pivot falls to or below roundoff scale,
// DimensionMismatch when a is not square.
SpdFactor factor_spd(const Matrix& a);

// Solves A z = b given the factor of A. Throws DimensionMismatch.
Vector solve_spd(const SpdFactor& factor, const Vector& b);

// Materializes A^{-1} from the factor.
Matrix inverse_spd(const SpdFactor& factor);

// Smallest admissible value of 1 - x^T A^{-1} x when removing x's rank-one
// contribution; at or below it the downdated matrix is treated as singular.
inline constexpr double kDowndateTolerance = 1e-10;

// Given inv_state = A^{-1} (symmetric), returns (A - x x^T)^{-1} via the
// rank-one update A^{-1} + (A^{-1}x)(A^{-1}x)^T / (1 - x^T A^{-1} x).
// Throws RankCollapse when the denominator is <= kDowndateTolerance,
// DimensionMismatch on shape errors.
Matrix downdate_inverse(const Matrix& inv_state, const Vector& x);
void downdate_inverse_in_place(Matrix& inv_state, const Vector& x);

}  // namespace lsq
