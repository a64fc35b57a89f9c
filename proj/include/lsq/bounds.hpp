#pragma once

#include <cstddef>
#include <string>

#include "lsq/distributions.hpp"
#include "lsq/linalg.hpp"

namespace lsq {

// Population data generating process: x ~ N(0, sigma), y = beta^T x +
// noise_scale * eps with eps ~ noise (unit scale).
struct ModelSpec {
  Matrix sigma;
  Vector beta;
  NoiseDist noise;
  double noise_scale = 1.0;
};

// ||eps||_{psi_2} of a standard gaussian, sqrt(2 / (1 - e^{-2})). The default
// for the design-tail parameter omega, exact for gaussian covariates.
inline const double kGaussianPsi2 = 1.5209626006626172;

// Inputs shared by the bound evaluators. alpha is the removal fraction k/n
// and gamma the dimension fraction (p-1)/(n-k); the helpers below derive
// them. sigma_inv_norm is the operator norm of Sigma^{-1/2} and
// sigma_inv_v_norm the length of Sigma^{-1/2} v for the audited direction v.
// eta_misspec carries the rate prefactor: for the misspecification rate the
// population constant (1 + omega^3) ||Sigma^{-1/2}|| ||y||_{psi_2}, for the
// consistency rate the analogous blend of ||Sigma^{-1}(y x - E[y x])||_{psi_1},
// kappa and beta_norm. omega is ||Sigma^{-1/2} x||_{psi_2} of one covariate
// row. constant_C scales bound values, constant_c failure exponents; both
// default to 1 and are echoed in every report.
struct BoundParams {
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t k = 0;
  double alpha = 0.0;
  double gamma = 0.0;
  double t = 0.0;
  double delta = 0.0;
  double sigma_inv_norm = 1.0;
  double sigma_inv_v_norm = 1.0;
  double noise_scale = 1.0;
  double eta_misspec = 0.0;
  double kappa = 1.0;
  double beta_norm = 0.0;
  double omega = kGaussianPsi2;
  double constant_C = 1.0;
  double constant_c = 1.0;
};

// A bound value together with its guarantee. probability_raw is the failure
// complement exactly as the formula gives it; probability_guarantee clamps it
// to [0, 1] and vacuous marks a raw value at or below zero. Asymptotic
// results set asymptotic instead of a numeric guarantee.
struct BoundReport {
  std::string kind;
  double value = 0.0;
  bool asymptotic = false;
  double probability_guarantee = 1.0;
  double probability_raw = 1.0;
  bool vacuous = false;
  std::string regime;
  double value_without_gamma_factor = 0.0;
  bool has_gamma_variant = false;
  BoundParams params;
  NoiseDist noise;
};

double removal_fraction(std::size_t k, std::size_t n);
double dimension_fraction(std::size_t p, std::size_t n, std::size_t k);

// Quadrant label from the removal and dimension loads: I when both k/n and
// p/n fall below the cutoff, II when only p/n exceeds it, III when only k/n
// does, IV when both do.
std::string classify_regime(std::size_t n, std::size_t p, std::size_t k, double cutoff = 0.1);

// ||Sigma^{-1/2}||_op and ||Sigma^{-1/2} v||, computed from the covariance.
double sigma_inv_operator_norm(const Matrix& sigma);
double sigma_inv_direction_norm(const Matrix& sigma, const Vector& v);

// Large-n limit of the removal effect: sigma_inv_v_norm * T(alpha) / (1 -
// alpha) with T the truncated product moment, for unit-scale noise. Scale
// sigma_inv_v_norm by the noise scale for scaled models. alpha must lie in
// (0, 1/2). The guarantee is asymptotic.
BoundReport asymptotic_lower_bound(double alpha, double sigma_inv_v_norm, const NoiseDist& noise);

// Finite-sample version with explicit slack t in [0, alpha) and delta >= 0.
// Reduces to the asymptotic value at t = delta = 0. Throws
// LeadingTermNonpositive when the leading bracket is not positive. Also
// reports the variant with the (1 - gamma) numerator dropped, which the
// analysis suggests is an artifact.
BoundReport finite_sample_lower_bound(const BoundParams& params, const NoiseDist& noise);

// Worst-case upper bound on ||beta_hat - beta_hat_subset|| over all removals
// of at most k rows, for gaussian noise; it dominates the delta along any
// unit direction. Throws RhoTooLarge when the spectral margin rho reaches 1.
// k = 0 reports value 0 with certainty.
BoundReport gaussian_upper_bound(const BoundParams& params);

enum class RateKind { misspec_delta, consistency };

// Order-of-magnitude rates with constants C and c taken from params:
// misspec_delta bounds the removal effect under misspecification,
// consistency bounds ||beta_hat - beta||. Throws ConditionViolated when the
// design-tail condition fails.
BoundReport rate_bounds(RateKind kind, const BoundParams& params);

}  // namespace lsq
