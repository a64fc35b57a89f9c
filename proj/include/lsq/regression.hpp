#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lsq/linalg.hpp"

namespace lsq {

// Rows observe (x_i, y_i); design is n x p, response has length n. Names and
// ids are optional annotations and may be empty. Fits never add an intercept
// column; include one in the design explicitly if wanted.
struct Dataset {
  Matrix design;
  Vector response;
  std::vector<std::string> column_names;
  std::vector<std::string> row_ids;

  std::size_t n() const { return design.rows(); }
  std::size_t p() const { return design.cols(); }
};

enum class Loss { squared, huber };

// Which objective a fit minimized; tau only applies to huber.
struct LossSpec {
  Loss kind = Loss::squared;
  double tau = 1.0;
};

struct HuberConfig {
  double tau = 1.0;
  int max_iterations = 200;
  // Convergence threshold on the sup-norm change of the coefficient vector
  // between reweighting steps.
  double tolerance = 1e-9;
};

// Fitted model over a subset of rows. residuals and leverages are parallel to
// active_rows (always stored in ascending order). gram_inverse and leverages
// are computed from the plain (unweighted) gram matrix of the active design
// rows, also for huber fits. A leverage equals 1 exactly when the row is
// interpolated and its removal would make the design rank deficient; such
// rows surface as PivotalRow in loo_effects.
struct RegressionFit {
  Vector coefficients;
  Matrix gram_inverse;
  Vector residuals;
  Vector leverages;
  std::vector<std::size_t> active_rows;
  LossSpec loss;
  double condition_log = 0.0;
  int iterations = 0;
};

// Least squares fit over all rows, or over the given subset. Throws
// RankDeficient when the active design has collinear columns or fewer rows
// than columns, DimensionMismatch on malformed shapes or row indices,
// NonFiniteValue when a used entry is not finite.
RegressionFit fit_ols(const Dataset& data);
RegressionFit fit_ols(const Dataset& data, std::vector<std::size_t> rows);

// Coefficients-only least squares, skipping the inverse gram, residual and
// leverage fields. Used by large simulations where only the estimate matters.
Vector ols_coefficients(const Dataset& data, const std::vector<std::size_t>& rows);

// Huber fit by iteratively reweighted least squares, weights
// w_i = min(1, tau / |r_i|) (weight 1 when r_i == 0), warm started at the
// least squares solution or at initial_coefficients when given. Residuals are
// never rescaled by a dispersion estimate; tau is in response units. Throws
// NoConvergence when max_iterations is reached.
RegressionFit fit_huber(const Dataset& data, const HuberConfig& config);
RegressionFit fit_huber(const Dataset& data, const HuberConfig& config, std::vector<std::size_t> rows);
RegressionFit fit_huber(const Dataset& data, const HuberConfig& config, std::vector<std::size_t> rows,
                        const Vector& initial_coefficients);

// Exact leave-one-out effects for a squared-loss fit: entry j is
// direction^T (beta_hat - beta_hat_without_row) for active row j, computed
// from the fitted state without refitting. Throws PivotalRow when a leverage
// is within 1e-10 of 1.
Vector loo_effects(const RegressionFit& fit, const Dataset& data, const Vector& direction);

// First-order influence approximation of the same quantity: the leave-one-out
// effect without its 1/(1 - leverage) correction.
Vector influence_scores(const RegressionFit& fit, const Dataset& data, const Vector& direction);

}  // namespace lsq
