#include "lsq/regression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "lsq/errors.hpp"

namespace lsq {

namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

// Sorts, bounds-checks and de-duplicate-checks the active row set.
std::vector<std::size_t> canonical_rows(const Dataset& data, std::vector<std::size_t> rows) {
  if (data.design.rows() != data.response.size())
    throw DimensionMismatch("fit: design and response row counts differ");
  if (data.p() == 0) throw DimensionMismatch("fit: design has no columns");
  std::sort(rows.begin(), rows.end());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j] >= data.n()) throw DimensionMismatch("fit: row index out of range");
    if (j > 0 && rows[j] == rows[j - 1]) throw DimensionMismatch("fit: duplicate row index");
  }
  if (rows.size() < data.p()) throw RankDeficient("fit: fewer active rows than columns");
  return rows;
}

void check_finite(const Dataset& data, const std::vector<std::size_t>& rows) {
  for (std::size_t i : rows) {
    if (!std::isfinite(data.response[i])) throw NonFiniteValue("fit: non-finite response in row " + std::to_string(i));
    const double* x = data.design.row(i);
    for (std::size_t c = 0; c < data.p(); ++c)
      if (!std::isfinite(x[c])) throw NonFiniteValue("fit: non-finite design entry in row " + std::to_string(i));
  }
}

// Gram matrix and moment vector of the active rows, optionally reweighted.
// Accumulates the upper triangle only and mirrors it.
void accumulate_normal_equations(const Dataset& data, const std::vector<std::size_t>& rows, const Vector* weights,
                                 Matrix& gram, Vector& moment) {
  const std::size_t p = data.p();
  gram = Matrix(p, p, 0.0);
  moment.assign(p, 0.0);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double* x = data.design.row(rows[j]);
    const double w = weights ? (*weights)[j] : 1.0;
    const double wy = w * data.response[rows[j]];
    for (std::size_t a = 0; a < p; ++a) {
      const double wxa = w * x[a];
      double* grow = gram.row(a);
      for (std::size_t b = a; b < p; ++b) grow[b] += wxa * x[b];
      moment[a] += wy * x[a];
    }
  }
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = a + 1; b < p; ++b) gram(b, a) = gram(a, b);
}

SpdFactor factor_gram(const Matrix& gram) {
  try {
    return factor_spd(gram);
  } catch (const NotPositiveDefinite&) {
    throw RankDeficient("fit: active design is rank deficient");
  }
}

Vector residuals_over(const Dataset& data, const std::vector<std::size_t>& rows, const Vector& beta) {
  Vector r(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double* x = data.design.row(rows[j]);
    double s = data.response[rows[j]];
    for (std::size_t c = 0; c < data.p(); ++c) s -= x[c] * beta[c];
    r[j] = s;
  }
  return r;
}

// Finishes a fit: inverse gram, residuals, leverages from the unweighted gram.
RegressionFit assemble_fit(const Dataset& data, std::vector<std::size_t> rows, Vector beta, LossSpec loss,
                           int iterations) {
  Matrix gram;
  Vector moment;
  accumulate_normal_equations(data, rows, nullptr, gram, moment);
  SpdFactor factor = factor_gram(gram);

  RegressionFit fit;
  fit.gram_inverse = inverse_spd(factor);
  fit.residuals = residuals_over(data, rows, beta);
  fit.leverages.resize(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double* x = data.design.row(rows[j]);
    double h = 0.0;
    for (std::size_t a = 0; a < data.p(); ++a) {
      const double* grow = fit.gram_inverse.row(a);
      double s = 0.0;
      for (std::size_t b = 0; b < data.p(); ++b) s += grow[b] * x[b];
      h += x[a] * s;
    }
    fit.leverages[j] = std::max(h, 0.0);
  }
  fit.coefficients = std::move(beta);
  fit.active_rows = std::move(rows);
  fit.loss = loss;
  fit.condition_log = factor.log_condition_estimate;
  fit.iterations = iterations;
  return fit;
}

Vector solve_normal_equations(const Dataset& data, const std::vector<std::size_t>& rows, const Vector* weights) {
  Matrix gram;
  Vector moment;
  accumulate_normal_equations(data, rows, weights, gram, moment);
  return solve_spd(factor_gram(gram), moment);
}

}  // namespace

RegressionFit fit_ols(const Dataset& data) { return fit_ols(data, all_rows(data.n())); }

RegressionFit fit_ols(const Dataset& data, std::vector<std::size_t> rows) {
  rows = canonical_rows(data, std::move(rows));
  check_finite(data, rows);
  Vector beta = solve_normal_equations(data, rows, nullptr);
  return assemble_fit(data, std::move(rows), std::move(beta), LossSpec{Loss::squared, 1.0}, 0);
}

Vector ols_coefficients(const Dataset& data, const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> sorted = canonical_rows(data, rows);
  return solve_normal_equations(data, sorted, nullptr);
}

RegressionFit fit_huber(const Dataset& data, const HuberConfig& config) {
  return fit_huber(data, config, all_rows(data.n()));
}

RegressionFit fit_huber(const Dataset& data, const HuberConfig& config, std::vector<std::size_t> rows) {
  rows = canonical_rows(data, std::move(rows));
  check_finite(data, rows);
  Vector start = solve_normal_equations(data, rows, nullptr);
  return fit_huber(data, config, std::move(rows), start);
}

RegressionFit fit_huber(const Dataset& data, const HuberConfig& config, std::vector<std::size_t> rows,
                        const Vector& initial_coefficients) {
  if (!(config.tau > 0.0)) throw UsageError("fit_huber: tau must be positive");
  if (config.max_iterations < 1) throw UsageError("fit_huber: max_iterations must be at least 1");
  if (!(config.tolerance > 0.0)) throw UsageError("fit_huber: tolerance must be positive");
  rows = canonical_rows(data, std::move(rows));
  check_finite(data, rows);
  if (initial_coefficients.size() != data.p()) throw DimensionMismatch("fit_huber: warm start size mismatch");

  Vector beta = initial_coefficients;
  Vector weights(rows.size(), 1.0);
  bool converged = false;
  int used = 0;
  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    Vector r = residuals_over(data, rows, beta);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const double ar = std::abs(r[j]);
      weights[j] = ar > config.tau ? config.tau / ar : 1.0;
    }
    Vector next = solve_normal_equations(data, rows, &weights);
    double change = 0.0;
    for (std::size_t c = 0; c < next.size(); ++c) change = std::max(change, std::abs(next[c] - beta[c]));
    beta = std::move(next);
    used = iter;
    if (change <= config.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NoConvergence("fit_huber: no convergence in " + std::to_string(config.max_iterations) + " iterations");
  return assemble_fit(data, std::move(rows), std::move(beta), LossSpec{Loss::huber, config.tau}, used);
}

namespace {

// Shared core of loo_effects and influence_scores: score_j and leverage_j.
Vector direction_scores(const RegressionFit& fit, const Dataset& data, const Vector& direction) {
  if (direction.size() != data.p()) throw DimensionMismatch("direction size mismatch");
  if (fit.gram_inverse.rows() != data.p()) throw DimensionMismatch("fit does not match dataset");
  Vector w = matvec(fit.gram_inverse, direction);
  Vector scores(fit.active_rows.size());
  for (std::size_t j = 0; j < fit.active_rows.size(); ++j) {
    const double* x = data.design.row(fit.active_rows[j]);
    double s = 0.0;
    for (std::size_t c = 0; c < data.p(); ++c) s += w[c] * x[c];
    scores[j] = s * fit.residuals[j];
  }
  return scores;
}

}  // namespace

Vector loo_effects(const RegressionFit& fit, const Dataset& data, const Vector& direction) {
  Vector effects = direction_scores(fit, data, direction);
  for (std::size_t j = 0; j < effects.size(); ++j) {
    const double gap = 1.0 - fit.leverages[j];
    if (gap <= 1e-10)
      throw PivotalRow("loo_effects: active row " + std::to_string(fit.active_rows[j]) + " is pivotal");
    effects[j] /= gap;
  }
  return effects;
}

Vector influence_scores(const RegressionFit& fit, const Dataset& data, const Vector& direction) {
  return direction_scores(fit, data, direction);
}

}  // namespace lsq
