#include "lsq/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "lsq/audit.hpp"
#include "lsq/errors.hpp"
#include "lsq/rng.hpp"

namespace lsq {

namespace {

const char* const kKnownMethods[] = {"amip", "one_greedy", "adversarial_oracle", "theory"};

bool known_method(const std::string& name) {
  return std::find(std::begin(kKnownMethods), std::end(kKnownMethods), name) !=
         std::end(kKnownMethods);
}

bool is_identity(const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (m(i, j) != (i == j ? 1.0 : 0.0)) return false;
  return true;
}

double row_dot(const double* row, const Vector& v) {
  double s = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) s += row[j] * v[j];
  return s;
}

// Runs work(0), ..., work(count - 1) on up to the requested number of
// threads. Work items write only to their own slots, so the outcome does not
// depend on scheduling. The first non-recovered exception is rethrown after
// all threads finish.
template <class Work>
void parallel_for(std::size_t count, unsigned threads, const Work& work) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_guard;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        work(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_guard);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct GenPlan {
  CovariateFamily family;
  ResponseMap response;
  NoiseDist noise;
  const Matrix* sigma;
  const Vector* beta;
  double noise_scale;
};

GeneratedSample generate(const GenPlan& plan, std::size_t n, std::size_t p, std::uint64_t seed) {
  if (p == 0) throw UsageError("generate: p must be positive");
  if (n < p) throw UsageError("generate: need n >= p");
  if (plan.beta->size() != p) throw DimensionMismatch("generate: beta length must equal p");
  bool colored = plan.sigma->rows() != 0;
  if (colored && (plan.sigma->rows() != p || plan.sigma->cols() != p))
    throw DimensionMismatch("generate: sigma must be p x p");
  if (colored && is_identity(*plan.sigma)) colored = false;
  SpdFactor chol;
  if (colored) chol = factor_spd(*plan.sigma);

  Rng rng(seed);
  GeneratedSample out;
  out.data.design = Matrix(n, p);
  out.data.response.resize(n);
  out.noise.resize(n);
  out.whitened_first.resize(n);
  Vector z(p);
  const Vector& beta = *plan.beta;
  const double sqrt_p = std::sqrt(static_cast<double>(p));
  for (std::size_t i = 0; i < n; ++i) {
    switch (plan.family) {
      case CovariateFamily::gaussian:
        for (std::size_t j = 0; j < p; ++j) z[j] = rng.normal();
        break;
      case CovariateFamily::rademacher:
        for (std::size_t j = 0; j < p; ++j) z[j] = rng.rademacher();
        break;
      case CovariateFamily::uniform_sphere: {
        double norm2 = 0.0;
        do {
          norm2 = 0.0;
          for (std::size_t j = 0; j < p; ++j) {
            z[j] = rng.normal();
            norm2 += z[j] * z[j];
          }
        } while (norm2 == 0.0);
        const double scale = sqrt_p / std::sqrt(norm2);
        for (std::size_t j = 0; j < p; ++j) z[j] *= scale;
        break;
      }
    }
    out.whitened_first[i] = z[0];
    double* row = out.data.design.row(i);
    if (colored) {
      for (std::size_t r = p; r-- > 0;) {
        double s = 0.0;
        for (std::size_t j = 0; j <= r; ++j) s += chol.factor_data(r, j) * z[j];
        row[r] = s;
      }
    } else {
      std::copy(z.begin(), z.end(), row);
    }
    const double link = row_dot(row, beta);
    double signal = 0.0;
    switch (plan.response) {
      case ResponseMap::linear_plus_noise:
        signal = link;
        break;
      case ResponseMap::quadratic_link:
        signal = link * link / sqrt_p;
        break;
      case ResponseMap::sign_link:
        signal = link > 0.0 ? 1.0 : (link < 0.0 ? -1.0 : 0.0);
        break;
    }
    const double eps = sample_noise(plan.noise, rng);
    out.noise[i] = eps;
    out.data.response[i] = signal + plan.noise_scale * eps;
  }
  return out;
}

GenPlan plan_of(const SimulationConfig& cfg) {
  if (const auto* m2 = std::get_if<ModelSpec>(&cfg.model))
    return {CovariateFamily::gaussian, ResponseMap::linear_plus_noise, m2->noise,
            &m2->sigma,               &m2->beta,                       m2->noise_scale};
  const auto& m1 = std::get<Misspec>(cfg.model);
  return {m1.covariates, m1.response, m1.noise, &m1.sigma, &m1.beta, m1.noise_scale};
}

}  // namespace

GeneratedSample gen_model2(const ModelSpec& spec, std::size_t n, std::uint64_t seed) {
  const GenPlan plan{CovariateFamily::gaussian, ResponseMap::linear_plus_noise,
                     spec.noise,                &spec.sigma,
                     &spec.beta,                spec.noise_scale};
  return generate(plan, n, spec.beta.size(), seed);
}

GeneratedSample gen_model1(const Misspec& m, std::size_t n, std::size_t p, std::uint64_t seed) {
  const GenPlan plan{m.covariates, m.response, m.noise, &m.sigma, &m.beta, m.noise_scale};
  return generate(plan, n, p, seed);
}

std::size_t removal_count(double alpha, std::size_t n) {
  if (!(alpha >= 0.0)) throw UsageError("removal_count: alpha must be nonnegative");
  return static_cast<std::size_t>(std::nearbyint(alpha * static_cast<double>(n)));
}

SimulationResult run_figure1(const SimulationConfig& cfg, unsigned threads) {
  if (cfg.replicates < 1) throw UsageError("run_figure1: replicates must be at least 1");
  if (cfg.alphas.empty()) throw UsageError("run_figure1: alphas must be non-empty");
  for (double alpha : cfg.alphas)
    if (!(alpha > 0.0 && alpha < 0.5))
      throw AlphaOutOfRange("run_figure1: every alpha must lie in (0, 1/2)");
  if (cfg.methods.empty()) throw UsageError("run_figure1: methods must be non-empty");
  if (cfg.p == 0 || cfg.n < cfg.p) throw UsageError("run_figure1: need n >= p >= 1");

  bool want_theory = false;
  std::vector<std::string> run_methods;
  for (const auto& name : cfg.methods) {
    if (!known_method(name)) throw UsageError("run_figure1: unknown method " + name);
    if (std::count(cfg.methods.begin(), cfg.methods.end(), name) != 1)
      throw UsageError("run_figure1: duplicate method " + name);
    if (name == "theory")
      want_theory = true;
    else
      run_methods.push_back(name);
  }

  const GenPlan plan = plan_of(cfg);
  if (plan.beta->size() != cfg.p)
    throw DimensionMismatch("run_figure1: model beta must have length p");
  if (plan.sigma->rows() != 0 && (plan.sigma->rows() != cfg.p || plan.sigma->cols() != cfg.p))
    throw DimensionMismatch("run_figure1: model sigma must be p x p");

  Vector direction = cfg.direction;
  if (direction.empty()) {
    direction.assign(cfg.p, 0.0);
    direction[0] = 1.0;
  } else if (direction.size() != cfg.p) {
    throw DimensionMismatch("run_figure1: direction must have length p");
  }

  std::vector<std::size_t> k_per_alpha;
  k_per_alpha.reserve(cfg.alphas.size());
  for (double alpha : cfg.alphas) k_per_alpha.push_back(removal_count(alpha, cfg.n));

  SimulationResult out;
  out.config = cfg;
  if (want_theory) {
    const double dir_norm = plan.sigma->rows() == 0 ? std::sqrt(dot(direction, direction))
                                                    : sigma_inv_direction_norm(*plan.sigma, direction);
    out.theory.reserve(cfg.alphas.size());
    for (double alpha : cfg.alphas)
      out.theory.push_back(
          asymptotic_lower_bound(alpha, dir_norm * plan.noise_scale, plan.noise).value);
  }

  const std::size_t replicates = cfg.replicates;
  const std::size_t n_alphas = cfg.alphas.size();
  const std::size_t n_methods = run_methods.size();
  out.replicate_seeds.resize(replicates);
  for (std::size_t r = 0; r < replicates; ++r)
    out.replicate_seeds[r] = split_seed(cfg.master_seed, r);

  std::vector<double> value(replicates * n_alphas * n_methods, 0.0);
  std::vector<char> ok(replicates * n_alphas * n_methods, 0);

  auto work = [&](std::size_t r) {
    try {
      const GeneratedSample sample = generate(plan, cfg.n, cfg.p, out.replicate_seeds[r]);
      std::vector<std::size_t> all_rows(cfg.n);
      std::iota(all_rows.begin(), all_rows.end(), 0);
      Vector full;
      bool have_full = false;
      for (std::size_t a = 0; a < n_alphas; ++a) {
        for (std::size_t m = 0; m < n_methods; ++m) {
          const std::size_t slot = (r * n_alphas + a) * n_methods + m;
          try {
            const std::string& name = run_methods[m];
            if (name == "adversarial_oracle") {
              if (!have_full) {
                full = ols_coefficients(sample.data, all_rows);
                have_full = true;
              }
              const Vector sub = ols_coefficients(
                  sample.data, adversarial_subset(sample.noise, sample.whitened_first, k_per_alpha[a]));
              value[slot] = row_dot(full.data(), direction) - row_dot(sub.data(), direction);
            } else {
              AuditQuery query;
              query.direction = direction;
              query.k_max = k_per_alpha[a];
              const AuditTrace trace =
                  name == "amip" ? amip_audit(sample.data, query) : one_greedy(sample.data, query);
              value[slot] = trace.achieved_delta;
            }
            ok[slot] = 1;
          } catch (const Error&) {
            // recorded as a failed replicate for this cell only
          }
        }
      }
    } catch (const Error&) {
      // generation failed; every cell of this replicate stays failed
    }
  };
  if (n_methods > 0) parallel_for(replicates, threads, work);

  out.cells.reserve(n_alphas * n_methods);
  for (std::size_t a = 0; a < n_alphas; ++a) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      MethodCurve curve;
      curve.method = run_methods[m];
      curve.alpha = cfg.alphas[a];
      double sum = 0.0;
      for (std::size_t r = 0; r < replicates; ++r) {
        const std::size_t slot = (r * n_alphas + a) * n_methods + m;
        if (ok[slot]) {
          ++curve.n_ok;
          sum += value[slot];
        }
      }
      if ((replicates - curve.n_ok) * 10 > replicates)
        throw NumericError("run_figure1: method " + curve.method +
                           " failed on more than 10% of replicates");
      curve.mean = curve.n_ok > 0 ? sum / static_cast<double>(curve.n_ok) : 0.0;
      if (curve.n_ok >= 2) {
        double ss = 0.0;
        for (std::size_t r = 0; r < replicates; ++r) {
          const std::size_t slot = (r * n_alphas + a) * n_methods + m;
          if (ok[slot]) ss += (value[slot] - curve.mean) * (value[slot] - curve.mean);
        }
        curve.sd = std::sqrt(ss / static_cast<double>(curve.n_ok - 1));
      }
      out.cells.push_back(std::move(curve));
    }
  }
  return out;
}

namespace {

struct RegimeRule {
  std::size_t p;
  std::size_t k;
};

RegimeRule regime_rule(const std::string& region, std::size_t n) {
  const auto root = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t quarter = (n + 3) / 4;
  if (region == "I") return {root, root};
  if (region == "II") return {quarter, root};
  if (region == "III") return {root, quarter};
  if (region == "IV") return {quarter, quarter};
  throw UsageError("run_regime_grid: unknown region " + region);
}

}  // namespace

std::vector<RegimeCell> run_regime_grid(const std::vector<std::size_t>& n_list,
                                        const std::vector<std::string>& regions,
                                        const ModelSpec& noise_spec, std::size_t seeds_per_cell,
                                        std::uint64_t master_seed, unsigned threads) {
  if (n_list.empty() || regions.empty())
    throw UsageError("run_regime_grid: n_list and regions must be non-empty");
  if (seeds_per_cell < 1) throw UsageError("run_regime_grid: seeds_per_cell must be at least 1");

  std::vector<RegimeCell> cells;
  cells.reserve(regions.size() * n_list.size());
  for (const auto& region : regions) {
    for (std::size_t n : n_list) {
      const RegimeRule rule = regime_rule(region, n);
      if (classify_regime(n, rule.p, rule.k) != region)
        throw UsageError("run_regime_grid: n = " + std::to_string(n) +
                         " is too small to land in region " + region);
      if (n < rule.p + rule.k)
        throw UsageError("run_regime_grid: n = " + std::to_string(n) +
                         " cannot support p + k rows of slack in region " + region);
      RegimeCell cell;
      cell.region = region;
      cell.n = n;
      cell.p = rule.p;
      cell.k = rule.k;
      cells.push_back(std::move(cell));
    }
  }

  const std::size_t seeds = seeds_per_cell;
  std::vector<double> delta(cells.size() * seeds, 0.0);
  std::vector<double> err_full(cells.size() * seeds, 0.0);
  std::vector<double> err_sub(cells.size() * seeds, 0.0);
  std::vector<char> ok(cells.size() * seeds, 0);

  auto work = [&](std::size_t unit) {
    const std::size_t ci = unit / seeds;
    const std::size_t s = unit % seeds;
    const RegimeCell& cell = cells[ci];
    try {
      ModelSpec spec;
      spec.beta.assign(cell.p, 0.0);
      spec.noise = noise_spec.noise;
      spec.noise_scale = noise_spec.noise_scale;
      const GeneratedSample sample =
          gen_model2(spec, cell.n, split_seed(split_seed(master_seed, ci), s));
      std::vector<std::size_t> all_rows(cell.n);
      std::iota(all_rows.begin(), all_rows.end(), 0);
      const Vector full = ols_coefficients(sample.data, all_rows);
      const Vector sub = ols_coefficients(
          sample.data, adversarial_subset(sample.noise, sample.whitened_first, cell.k));
      delta[unit] = full[0] - sub[0];
      // the generating coefficient is zero, so the fit norm is the error
      err_full[unit] = std::sqrt(dot(full, full));
      err_sub[unit] = std::sqrt(dot(sub, sub));
      ok[unit] = 1;
    } catch (const Error&) {
      // recorded; surfaces in n_ok and the failure-rate cap
    }
  };
  parallel_for(cells.size() * seeds, threads, work);

  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    RegimeCell& cell = cells[ci];
    double sum_delta = 0.0, sum_full = 0.0, sum_sub = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
      const std::size_t unit = ci * seeds + s;
      if (!ok[unit]) continue;
      ++cell.n_ok;
      sum_delta += delta[unit];
      sum_full += err_full[unit];
      sum_sub += err_sub[unit];
    }
    if ((seeds - cell.n_ok) * 10 > seeds)
      throw NumericError("run_regime_grid: region " + cell.region + " at n = " +
                         std::to_string(cell.n) + " failed on more than 10% of seeds");
    if (cell.n_ok > 0) {
      const auto count = static_cast<double>(cell.n_ok);
      cell.mean_delta = sum_delta / count;
      cell.mean_fit_error_full = sum_full / count;
      cell.mean_fit_error_subset = sum_sub / count;
    }
    if (cell.n_ok >= 2) {
      double ss = 0.0;
      for (std::size_t s = 0; s < seeds; ++s) {
        const std::size_t unit = ci * seeds + s;
        if (ok[unit]) ss += (delta[unit] - cell.mean_delta) * (delta[unit] - cell.mean_delta);
      }
      cell.sd_delta = std::sqrt(ss / static_cast<double>(cell.n_ok - 1));
    }
  }
  return cells;
}

}  // namespace lsq
