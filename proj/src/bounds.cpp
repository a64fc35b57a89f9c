#include "lsq/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "lsq/errors.hpp"

namespace lsq {

namespace {

void set_probability(BoundReport& report, double raw) {
  report.probability_raw = raw;
  report.probability_guarantee = std::clamp(raw, 0.0, 1.0);
  report.vacuous = !(raw > 0.0);
}

void check_alpha_open_half(double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw AlphaOutOfRange("alpha must be in (0, 1/2)");
}

// sqrt(2 E eps^2 + ||eps||_{psi_2}^2) for unit-variance noise.
double eta_noise(const NoiseDist& noise) {
  const double psi2 = psi2_norm(noise);
  return std::sqrt(2.0 + psi2 * psi2);
}

}  // namespace

double removal_fraction(std::size_t k, std::size_t n) {
  if (n == 0) throw UsageError("removal_fraction: n must be positive");
  return static_cast<double>(k) / static_cast<double>(n);
}

double dimension_fraction(std::size_t p, std::size_t n, std::size_t k) {
  if (p == 0) throw UsageError("dimension_fraction: p must be positive");
  if (n <= k) throw UsageError("dimension_fraction: need k < n");
  return static_cast<double>(p - 1) / static_cast<double>(n - k);
}

std::string classify_regime(std::size_t n, std::size_t p, std::size_t k, double cutoff) {
  if (n == 0) throw UsageError("classify_regime: n must be positive");
  const bool heavy_k = static_cast<double>(k) / static_cast<double>(n) >= cutoff;
  const bool heavy_p = static_cast<double>(p) / static_cast<double>(n) >= cutoff;
  if (!heavy_k && !heavy_p) return "I";
  if (!heavy_k) return "II";
  if (!heavy_p) return "III";
  return "IV";
}

double sigma_inv_operator_norm(const Matrix& sigma) {
  // ||Sigma^{-1/2}|| = 1 / sqrt(lambda_min(Sigma)); lambda_min comes from
  // power iteration on Sigma^{-1}, deterministic start.
  SpdFactor factor = factor_spd(sigma);
  const std::size_t p = sigma.rows();
  Vector v(p, 1.0 / std::sqrt(static_cast<double>(p)));
  double lambda = 0.0;
  for (int iter = 0; iter < 500; ++iter) {
    Vector w = solve_spd(factor, v);
    const double norm = std::sqrt(dot(w, w));
    for (std::size_t i = 0; i < p; ++i) w[i] /= norm;
    Vector mapped = solve_spd(factor, w);
    const double next = dot(w, mapped);
    const bool settled = std::abs(next - lambda) <= 1e-13 * std::max(1.0, std::abs(next));
    lambda = next;
    v = std::move(w);
    if (settled && iter > 2) break;
  }
  return std::sqrt(lambda);
}

double sigma_inv_direction_norm(const Matrix& sigma, const Vector& v) {
  SpdFactor factor = factor_spd(sigma);
  Vector w = solve_spd(factor, v);
  return std::sqrt(std::max(dot(v, w), 0.0));
}

BoundReport asymptotic_lower_bound(double alpha, double sigma_inv_v_norm, const NoiseDist& noise) {
  check_alpha_open_half(alpha);
  if (!(sigma_inv_v_norm >= 0.0)) throw UsageError("asymptotic_lower_bound: negative direction norm");
  if (!noise.sub_gaussian()) throw UnsupportedDistribution("asymptotic_lower_bound: student_t noise");

  BoundReport report;
  report.kind = "asymptotic_lower_bound";
  report.value = sigma_inv_v_norm * truncated_product_moment(noise, alpha) / (1.0 - alpha);
  report.asymptotic = true;
  report.params.alpha = alpha;
  report.params.sigma_inv_v_norm = sigma_inv_v_norm;
  report.noise = noise;
  return report;
}

BoundReport finite_sample_lower_bound(const BoundParams& params, const NoiseDist& noise) {
  check_alpha_open_half(params.alpha);
  if (!noise.sub_gaussian()) throw UnsupportedDistribution("finite_sample_lower_bound: student_t noise");
  if (!(params.gamma >= 0.0 && params.gamma < 1.0))
    throw UsageError("finite_sample_lower_bound: gamma must be in [0, 1)");
  if (!(params.t >= 0.0) || !(params.delta >= 0.0))
    throw UsageError("finite_sample_lower_bound: t and delta must be nonnegative");
  if (!(params.t < params.alpha)) throw AlphaOutOfRange("finite_sample_lower_bound: t must be below alpha");
  const double gap = 1.0 - params.gamma - params.t;
  if (!(gap > 0.0)) throw UsageError("finite_sample_lower_bound: need t < 1 - gamma");
  const double penalty_root = 1.0 - std::sqrt(params.gamma * (1.0 - params.alpha)) - params.t;
  if (!(penalty_root > 0.0)) throw UsageError("finite_sample_lower_bound: penalty denominator vanishes");

  const double truncated = truncated_product_moment(noise, params.alpha - params.t);
  const double q_term = (1.0 - params.t) * truncated - params.t * psi1_product_norm(noise);
  const double eta = eta_noise(noise);
  const double bracket = q_term / (1.0 - params.alpha + 3.0 * params.t) - 3.0 * eta * params.delta;
  const double lead = (1.0 - params.gamma) / gap * bracket;
  if (!(lead > 0.0)) throw LeadingTermNonpositive("finite_sample_lower_bound: leading term is not positive");
  const double penalty = eta * params.t / (penalty_root * penalty_root);

  BoundReport report;
  report.kind = "finite_sample_lower_bound";
  report.value = params.sigma_inv_v_norm * (lead - penalty) * params.noise_scale;
  report.has_gamma_variant = true;
  report.value_without_gamma_factor =
      params.sigma_inv_v_norm * (bracket / gap - penalty) * params.noise_scale;

  const double n = static_cast<double>(params.n);
  const double free_rows = static_cast<double>(params.n) - static_cast<double>(params.k + params.p);
  const double raw = 1.0 - 13.0 * std::exp(-params.constant_c * n * params.t * params.t) -
                     std::exp2(-params.constant_c * free_rows * params.delta * params.delta) -
                     3.0 * std::exp(-n * (0.5 - params.alpha) * (0.5 - params.alpha));
  set_probability(report, raw);
  report.params = params;
  report.noise = noise;
  if (params.n > 0) report.regime = classify_regime(params.n, params.p, params.k);
  return report;
}

BoundReport gaussian_upper_bound(const BoundParams& params) {
  BoundReport report;
  report.kind = "gaussian_upper_bound";
  report.params = params;
  report.noise = NoiseDist{NoiseKind::gaussian, 0.0};
  if (params.n == 0) throw UsageError("gaussian_upper_bound: n must be positive");
  report.regime = classify_regime(params.n, params.p, params.k);
  if (params.k == 0) {
    set_probability(report, 1.0);
    return report;
  }
  if (2 * params.k > params.n) throw UsageError("gaussian_upper_bound: requires k <= n/2");
  if (params.p + params.k > params.n) throw UsageError("gaussian_upper_bound: requires p <= n - k");

  const double n = static_cast<double>(params.n);
  const double k = static_cast<double>(params.k);
  const double p = static_cast<double>(params.p);
  const double load = std::log(std::exp(1.0) * n / k);
  const double rho = std::sqrt(3.0 * k / n * load) + std::sqrt(p / n) + params.delta;
  if (!(rho < 1.0)) throw RhoTooLarge("gaussian_upper_bound: rho = " + std::to_string(rho));

  const double one_t = 1.0 + params.t;
  const double first = (6.0 * k / n * load + 2.0 / n * std::sqrt(k * p * load)) * one_t * one_t;
  const double second = 72.0 * std::sqrt(k) * (k + p) / std::pow(n, 1.5) * std::pow(load, 1.5) * one_t * one_t * one_t;
  const double margin = 1.0 - rho;
  report.value =
      params.sigma_inv_norm * params.noise_scale / (margin * margin * margin * margin) * (first + second);

  const double raw = 1.0 - 6.0 * std::pow(std::exp(1.0) * n / k, -k * params.t * params.t) - std::exp(-0.5 * n) -
                     2.0 * std::exp(-0.5 * n * params.delta * params.delta);
  set_probability(report, raw);
  return report;
}

BoundReport rate_bounds(RateKind kind, const BoundParams& params) {
  if (params.n == 0 || params.p == 0) throw UsageError("rate_bounds: n and p must be positive");
  const double n = static_cast<double>(params.n);
  const double k = static_cast<double>(params.k);
  const double p = static_cast<double>(params.p);
  const double omega2 = params.omega * params.omega;

  BoundReport report;
  report.params = params;
  report.regime = classify_regime(params.n, params.p, params.k);
  const double one_t = 1.0 + params.t;

  if (kind == RateKind::misspec_delta) {
    report.kind = "misspec_delta_rate";
    if (params.k == 0) {
      set_probability(report, 1.0);
      return report;
    }
    const double load = std::log(std::exp(1.0) * n / k);
    if (!(omega2 * (std::sqrt(k / n * load) + std::sqrt(p / n)) <= params.constant_c))
      throw ConditionViolated("rate_bounds: misspecification regime condition fails");
    report.value = params.constant_C * params.eta_misspec *
                   (k / n * load + std::sqrt(k * p * load) / n) * one_t * one_t;
    const double raw = 1.0 - 3.0 * std::pow(std::exp(1.0) * n / k, -k * params.t * params.t) -
                       4.0 * std::exp(-params.constant_c * n / (omega2 * omega2));
    set_probability(report, raw);
    return report;
  }

  report.kind = "consistency_rate";
  if (!(omega2 * std::sqrt(p / n) <= params.constant_c))
    throw ConditionViolated("rate_bounds: consistency regime condition fails");
  report.value =
      params.constant_C * params.eta_misspec * (std::sqrt(p / n) * one_t + p / n * one_t * one_t);
  const double raw = 1.0 - 3.0 * std::exp(-p * params.t * params.t) -
                     3.0 * std::exp(-params.constant_c * n / (omega2 * omega2));
  set_probability(report, raw);
  return report;
}

}  // namespace lsq
