#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "lsq/bounds.hpp"
#include "lsq/regression.hpp"

namespace lsq {

enum class CovariateFamily { gaussian, rademacher, uniform_sphere };
enum class ResponseMap { linear_plus_noise, quadratic_link, sign_link };

// Misspecified data generating process: covariates from a sub-gaussian
// family, response through a possibly non-linear link plus independent
// noise. sigma applies to the gaussian family only and may be left empty
// for the identity. uniform_sphere draws from the sphere of radius sqrt(p),
// which keeps every component at unit variance.
struct Misspec {
  CovariateFamily covariates = CovariateFamily::gaussian;
  ResponseMap response = ResponseMap::linear_plus_noise;
  NoiseDist noise;
  Matrix sigma;
  Vector beta;
  double noise_scale = 1.0;
};

// A generated dataset plus the latent pieces oracle audits need: the
// unit-scale noise draws and the first coordinate of each pre-coloring
// standard draw (for gaussian covariates with identity covariance this is
// just the first design column).
struct GeneratedSample {
  Dataset data;
  Vector noise;
  Vector whitened_first;
};

// Draws n rows with x ~ N(0, sigma) and y = beta^T x + noise_scale * eps.
// Deterministic in seed; per row the covariates are drawn first, then the
// noise. An empty sigma means the identity.
GeneratedSample gen_model2(const ModelSpec& spec, std::size_t n, std::uint64_t seed);

// Draws n rows of p covariates from the configured family and maps them
// through the response link: linear_plus_noise gives beta^T x, quadratic_link
// (beta^T x)^2 / sqrt(p), sign_link sign(beta^T x), each plus
// noise_scale * eps. linear_plus_noise with gaussian covariates reproduces
// gen_model2 exactly.
GeneratedSample gen_model1(const Misspec& m, std::size_t n, std::size_t p, std::uint64_t seed);

// round(alpha * n) with ties to even.
std::size_t removal_count(double alpha, std::size_t n);

// One experiment sweep: replicates independent datasets, a removal audit per
// alpha and method, direction defaulting to the first coordinate when left
// empty. methods is a subset of {"amip", "one_greedy", "adversarial_oracle",
// "theory"}.
struct SimulationConfig {
  std::variant<ModelSpec, Misspec> model;
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t replicates = 1;
  Vector alphas;
  Vector direction;
  std::uint64_t master_seed = 0;
  std::vector<std::string> methods;
};

// Aggregate over replicates for one (alpha, method) pair. sd is the
// per-dataset standard deviation with divisor n_ok - 1 (0 when fewer than
// two replicates survive).
struct MethodCurve {
  std::string method;
  double alpha = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n_ok = 0;
};

// cells are ordered alpha-major, then by the configured method order.
// theory holds one value per alpha (empty unless requested) computed by the
// bound evaluator itself. replicate_seeds echoes the derived per-replicate
// seeds.
struct SimulationResult {
  std::vector<MethodCurve> cells;
  Vector theory;
  std::vector<std::uint64_t> replicate_seeds;
  SimulationConfig config;
};

// Runs the removal-effect sweep. Replicate r always draws from
// split_seed(master_seed, r), so results are independent of thread count and
// execution order. Per-replicate failures are recorded and excluded from the
// aggregates; a failure rate above 10% in any cell aborts with NumericError.
SimulationResult run_figure1(const SimulationConfig& cfg, unsigned threads = 1);

// One (region, n) cell of the growth-regime grid: k and p follow the region
// rule, delta is the planted-removal estimate of the worst-case effect on the
// first coefficient, and the fit errors measure ||beta_hat - beta|| for the
// full fit and the post-removal fit.
struct RegimeCell {
  std::string region;
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t k = 0;
  double mean_delta = 0.0;
  double sd_delta = 0.0;
  double mean_fit_error_full = 0.0;
  double mean_fit_error_subset = 0.0;
  std::size_t n_ok = 0;
};

// Sweeps the four growth regimes over n_list: small loads grow as
// ceil(sqrt(n)), proportional loads as ceil(n/4). Region "I" keeps both k
// and p small, "II" grows p, "III" grows k, "IV" grows both. Data follows
// gen_model2 with identity covariance and zero coefficient, taking only the
// noise settings from noise_spec. Throws UsageError when a requested n is
// too small for the rule to land in its regime. Cell (ci, s) draws from
// split_seed(split_seed(master_seed, ci), s).
std::vector<RegimeCell> run_regime_grid(const std::vector<std::size_t>& n_list,
                                        const std::vector<std::string>& regions,
                                        const ModelSpec& noise_spec, std::size_t seeds_per_cell,
                                        std::uint64_t master_seed, unsigned threads = 1);

}  // namespace lsq
