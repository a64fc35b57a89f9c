#include "lsq/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "lsq/errors.hpp"
#include "lsq/linalg.hpp"

namespace lsq {

namespace {

constexpr double kPivotGap = 1e-10;
// Incremental subset states are rebuilt from scratch this often to stop
// rank-one update roundoff from accumulating over long removal paths.
constexpr int kRefreshInterval = 16;

int sign3(double x) { return (x > 0.0) - (x < 0.0); }

double binomial(std::size_t m, std::size_t r) {
  if (r > m) return 0.0;
  r = std::min(r, m - r);
  double v = 1.0;
  for (std::size_t t = 1; t <= r; ++t) v *= static_cast<double>(m - r + t) / static_cast<double>(t);
  return v;
}

// The signed coordinate checked for flips, and the direction the delta is
// measured along. For flip audits the working direction is the flip
// coordinate's axis, oriented by the full fit's sign.
struct WorkingDirection {
  Vector w;
  Vector check;
  int full_sign = 0;
};

WorkingDirection resolve_direction(const AuditQuery& query, const Vector& beta_full) {
  const std::size_t p = beta_full.size();
  WorkingDirection out;
  if (query.target == AuditTarget::flip_sign) {
    if (query.flip_coordinate >= p) throw DimensionMismatch("audit: flip coordinate out of range");
    out.check.assign(p, 0.0);
    out.check[query.flip_coordinate] = 1.0;
    const int s = sign3(beta_full[query.flip_coordinate]);
    out.w = out.check;
    if (s < 0)
      for (double& c : out.w) c = -c;
  } else {
    if (query.direction.size() != p) throw DimensionMismatch("audit: direction size mismatch");
    double norm = 0.0;
    for (double c : query.direction) norm += c * c;
    if (!(norm > 0.0)) throw DimensionMismatch("audit: direction must be nonzero");
    out.w = query.direction;
    out.check = query.direction;
  }
  out.full_sign = sign3(dot(out.check, beta_full));
  return out;
}

void validate_k_max(const Dataset& data, const AuditQuery& query) {
  if (query.k_max > data.n() - data.p()) throw DimensionMismatch("audit: k_max exceeds n - p");
}

// Squared-loss removal engine. Holds the inverse gram and coefficients of the
// current keep-set plus per-row caches g_i = w^T M x_i, leverage h_i and
// residual r_i, all updated in O(n p) per removal via the rank-one identity.
class RemovalEngine {
 public:
  RemovalEngine(const Dataset& data, const RegressionFit& full, WorkingDirection dir)
      : data_(data),
        dir_(std::move(dir)),
        beta_full_(full.coefficients),
        minv_(full.gram_inverse),
        beta_(full.coefficients),
        alive_(data.n(), 1),
        g_(data.n(), 0.0),
        h_(full.leverages),
        r_(full.residuals),
        alive_count_(data.n()) {
    rebuild_direction_cache();
  }

  std::size_t alive_count() const { return alive_count_; }
  bool alive(std::size_t i) const { return alive_[i] != 0; }
  bool admissible(std::size_t i) const { return alive(i) && 1.0 - h_[i] > kPivotGap; }

  // Exact effect of deleting row i on w^T beta of the current keep-set.
  double effect(std::size_t i) const { return g_[i] * r_[i] / (1.0 - h_[i]); }

  // First-order term of the same effect, without the leverage correction.
  double score(std::size_t i) const { return g_[i] * r_[i]; }

  double delta() const { return dot(dir_.w, beta_full_) - dot(dir_.w, beta_); }
  int current_sign() const { return sign3(dot(dir_.check, beta_)); }
  int full_sign() const { return dir_.full_sign; }

  void remove(std::size_t i) {
    if (!admissible(i)) throw RankCollapse("audit: removing row " + std::to_string(i) + " collapses the design");
    const std::size_t p = data_.p();
    const double* x = data_.design.row(i);
    Vector xi(x, x + p);
    Vector u = matvec(minv_, xi);
    const double denom = 1.0 - h_[i];
    const double rstar = r_[i];
    const double gstar = g_[i];

    alive_[i] = 0;
    --alive_count_;
    for (std::size_t j = 0; j < data_.n(); ++j) {
      if (!alive_[j]) continue;
      const double* xj = data_.design.row(j);
      double c = 0.0;
      for (std::size_t a = 0; a < p; ++a) c += u[a] * xj[a];
      g_[j] += gstar * c / denom;
      h_[j] += c * c / denom;
      r_[j] += c * rstar / denom;
    }
    for (std::size_t a = 0; a < p; ++a) beta_[a] -= u[a] * (rstar / denom);
    const double scale = 1.0 / denom;
    for (std::size_t a = 0; a < p; ++a) {
      double* row = minv_.row(a);
      const double ua = u[a] * scale;
      for (std::size_t b = 0; b < p; ++b) row[b] += ua * u[b];
    }
    if (++steps_since_refresh_ >= kRefreshInterval) refresh();
  }

  const Vector& coefficients() const { return beta_; }

 private:
  void refresh() {
    steps_since_refresh_ = 0;
    const std::size_t p = data_.p();
    Matrix gram(p, p, 0.0);
    Vector moment(p, 0.0);
    for (std::size_t i = 0; i < data_.n(); ++i) {
      if (!alive_[i]) continue;
      const double* x = data_.design.row(i);
      const double y = data_.response[i];
      for (std::size_t a = 0; a < p; ++a) {
        double* grow = gram.row(a);
        for (std::size_t b = a; b < p; ++b) grow[b] += x[a] * x[b];
        moment[a] += y * x[a];
      }
    }
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a + 1; b < p; ++b) gram(b, a) = gram(a, b);
    SpdFactor factor;
    try {
      factor = factor_spd(gram);
    } catch (const NotPositiveDefinite&) {
      throw RankCollapse("audit: keep-set design lost full rank");
    }
    beta_ = solve_spd(factor, moment);
    minv_ = inverse_spd(factor);
    for (std::size_t i = 0; i < data_.n(); ++i) {
      if (!alive_[i]) continue;
      const double* x = data_.design.row(i);
      Vector xi(x, x + data_.p());
      Vector u = matvec(minv_, xi);
      h_[i] = std::max(dot(xi, u), 0.0);
      r_[i] = data_.response[i] - dot(xi, beta_);
    }
    rebuild_direction_cache();
  }

  void rebuild_direction_cache() {
    Vector u = matvec(minv_, dir_.w);
    for (std::size_t i = 0; i < data_.n(); ++i) {
      if (!alive_[i]) continue;
      const double* x = data_.design.row(i);
      double s = 0.0;
      for (std::size_t a = 0; a < data_.p(); ++a) s += u[a] * x[a];
      g_[i] = s;
    }
  }

  const Dataset& data_;
  WorkingDirection dir_;
  Vector beta_full_;
  Matrix minv_;
  Vector beta_;
  std::vector<char> alive_;
  Vector g_, h_, r_;
  std::size_t alive_count_;
  int steps_since_refresh_ = 0;
};

void record_step(AuditTrace& trace, std::size_t row, double delta, int cur_sign, int full_sign, std::size_t step) {
  trace.removed.push_back(row);
  trace.delta_path.push_back(delta);
  if (!trace.flip_at && cur_sign != full_sign) trace.flip_at = step;
}

AuditTrace greedy_squared(const Dataset& data, const AuditQuery& query) {
  RegressionFit full = fit_ols(data);
  RemovalEngine engine(data, full, resolve_direction(query, full.coefficients));

  AuditTrace trace;
  trace.method = "one_greedy";
  for (std::size_t step = 1; step <= query.k_max; ++step) {
    std::size_t best = data.n();
    double best_effect = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < data.n(); ++i) {
      if (!engine.admissible(i)) continue;
      const double e = engine.effect(i);
      if (e > best_effect) {
        best_effect = e;
        best = i;
      }
    }
    if (best == data.n()) throw RankCollapse("audit: no admissible row left to remove");
    engine.remove(best);
    record_step(trace, best, engine.delta(), engine.current_sign(), engine.full_sign(), step);
    if (query.target == AuditTarget::flip_sign && trace.flip_at) break;
  }
  if (!trace.delta_path.empty()) trace.achieved_delta = trace.delta_path.back();
  return trace;
}

AuditTrace greedy_huber(const Dataset& data, const AuditQuery& query) {
  const HuberConfig cfg{query.loss.tau, query.huber.max_iterations, query.huber.tolerance};
  RegressionFit full = fit_huber(data, cfg);
  WorkingDirection dir = resolve_direction(query, full.coefficients);

  std::vector<std::size_t> keep(data.n());
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  Vector beta_cur = full.coefficients;

  // Pool preranking keys: last observed effect per row, seeded with the
  // first-order scores of the full fit.
  Vector key = influence_scores(full, data, dir.w);
  for (double& v : key) v = std::abs(v);

  AuditTrace trace;
  trace.method = "one_greedy";
  const double base = dot(dir.w, full.coefficients);

  for (std::size_t step = 1; step <= query.k_max; ++step) {
    std::vector<std::size_t> pool = keep;
    if (query.candidate_pool > 0 && query.candidate_pool < pool.size()) {
      std::nth_element(pool.begin(), pool.begin() + query.candidate_pool, pool.end(),
                       [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
      pool.resize(query.candidate_pool);
      std::sort(pool.begin(), pool.end());
    }

    std::size_t best = data.n();
    double best_delta = -std::numeric_limits<double>::infinity();
    Vector best_beta;
    int best_sign = 0;
    std::vector<std::size_t> rows;
    rows.reserve(keep.size() - 1);
    for (std::size_t cand : pool) {
      rows.clear();
      for (std::size_t rowi : keep)
        if (rowi != cand) rows.push_back(rowi);
      RegressionFit fit;
      try {
        fit = fit_huber(data, cfg, rows, beta_cur);
      } catch (const RankDeficient&) {
        continue;
      }
      const double d = base - dot(dir.w, fit.coefficients);
      key[cand] = std::abs(d);
      if (d > best_delta) {
        best_delta = d;
        best = cand;
        best_beta = fit.coefficients;
        best_sign = sign3(dot(dir.check, fit.coefficients));
      }
    }
    if (best == data.n()) throw RankCollapse("audit: no admissible row left to remove");
    keep.erase(std::find(keep.begin(), keep.end(), best));
    beta_cur = std::move(best_beta);
    record_step(trace, best, best_delta, best_sign, dir.full_sign, step);
    if (query.target == AuditTarget::flip_sign && trace.flip_at) break;
  }
  if (!trace.delta_path.empty()) trace.achieved_delta = trace.delta_path.back();
  return trace;
}

}  // namespace

AuditTrace one_greedy(const Dataset& data, const AuditQuery& query) {
  validate_k_max(data, query);
  if (query.loss.kind == Loss::huber) return greedy_huber(data, query);
  return greedy_squared(data, query);
}

AuditTrace amip_audit(const Dataset& data, const AuditQuery& query) {
  if (query.loss.kind != Loss::squared) throw UsageError("amip_audit: squared loss only");
  validate_k_max(data, query);
  RegressionFit full = fit_ols(data);
  RemovalEngine engine(data, full, resolve_direction(query, full.coefficients));

  std::vector<std::size_t> order(data.n());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Vector score(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) score[i] = engine.score(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

  AuditTrace trace;
  trace.method = "amip";
  for (std::size_t t = 0; t < query.k_max; ++t) {
    const std::size_t i = order[t];
    engine.remove(i);
    record_step(trace, i, engine.delta(), engine.current_sign(), engine.full_sign(), t + 1);
    if (query.target == AuditTarget::flip_sign && trace.flip_at) break;
  }
  if (!trace.delta_path.empty()) trace.achieved_delta = trace.delta_path.back();
  return trace;
}

AuditTrace brute_force_delta(const Dataset& data, const AuditQuery& query, std::uint64_t enumeration_budget) {
  if (query.loss.kind != Loss::squared) throw UsageError("brute_force_delta: squared loss only");
  validate_k_max(data, query);
  const std::size_t n = data.n();
  const std::size_t k = query.k_max;
  const double total = binomial(n, k);
  if (total > static_cast<double>(enumeration_budget))
    throw BudgetExceeded("brute_force_delta: " + std::to_string(total) + " subsets exceed the budget of " +
                         std::to_string(enumeration_budget));

  RegressionFit full = fit_ols(data);
  WorkingDirection dir = resolve_direction(query, full.coefficients);

  AuditTrace trace;
  trace.method = "brute_force";
  if (k == 0) return trace;

  const std::size_t p = data.p();
  std::vector<Matrix> minv(k + 1);
  std::vector<Vector> beta(k + 1);
  minv[0] = full.gram_inverse;
  beta[0] = full.coefficients;

  std::vector<std::size_t> chosen(k, 0);
  std::vector<std::size_t> best_subset;
  double best_delta = -std::numeric_limits<double>::infinity();
  std::uint64_t skipped = 0;
  const double base = dot(dir.w, full.coefficients);

  auto descend = [&](auto&& self, std::size_t depth, std::size_t start) -> void {
    if (depth == k) {
      const double d = base - dot(dir.w, beta[k]);
      if (d > best_delta) {
        best_delta = d;
        best_subset.assign(chosen.begin(), chosen.end());
      }
      return;
    }
    for (std::size_t j = start; j + (k - depth - 1) < n; ++j) {
      const double* x = data.design.row(j);
      Vector xj(x, x + p);
      Vector u = matvec(minv[depth], xj);
      const double denom = 1.0 - dot(xj, u);
      if (denom <= kPivotGap) {
        // Rank loss is monotone under further removal, so every completion
        // of this prefix is singular as well.
        skipped += static_cast<std::uint64_t>(binomial(n - 1 - j, k - depth - 1));
        continue;
      }
      const double rj = data.response[j] - dot(xj, beta[depth]);
      beta[depth + 1] = beta[depth];
      for (std::size_t a = 0; a < p; ++a) beta[depth + 1][a] -= u[a] * (rj / denom);
      minv[depth + 1] = minv[depth];
      const double scale = 1.0 / denom;
      for (std::size_t a = 0; a < p; ++a) {
        double* row = minv[depth + 1].row(a);
        const double ua = u[a] * scale;
        for (std::size_t b = 0; b < p; ++b) row[b] += ua * u[b];
      }
      chosen[depth] = j;
      self(self, depth + 1, j + 1);
    }
  };
  descend(descend, 0, 0);
  trace.skipped_subsets = skipped;
  if (best_subset.empty()) throw RankCollapse("brute_force_delta: every size-k removal collapses the design");

  // Replay the winning subset in ascending order to emit its prefix path.
  RemovalEngine engine(data, full, dir);
  for (std::size_t t = 0; t < best_subset.size(); ++t) {
    engine.remove(best_subset[t]);
    record_step(trace, best_subset[t], engine.delta(), engine.current_sign(), engine.full_sign(), t + 1);
  }
  trace.achieved_delta = trace.delta_path.back();
  return trace;
}

std::vector<std::size_t> adversarial_subset(const Vector& noise, const Vector& first_column, std::size_t k) {
  if (noise.size() != first_column.size()) throw DimensionMismatch("adversarial_subset: input size mismatch");
  const std::size_t n = noise.size();
  if (k > n) throw UsageError("adversarial_subset: k exceeds n");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return noise[a] * first_column[a] < noise[b] * first_column[b];
  });
  order.resize(n - k);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace lsq
