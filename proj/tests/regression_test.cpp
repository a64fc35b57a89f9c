#include "lsq/regression.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lsq/errors.hpp"
#include "lsq/rng.hpp"
#include "oracles.hpp"

using lsq::Dataset;
using lsq::Matrix;
using lsq::Vector;

namespace {

Dataset make_dataset(std::size_t n, std::size_t p, const std::vector<double>& design_rowmajor, Vector y) {
  Dataset d;
  d.design = Matrix(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) d.design(i, j) = design_rowmajor[i * p + j];
  d.response = std::move(y);
  return d;
}

Dataset random_dataset(lsq::Rng& rng, std::size_t n, std::size_t p, double noise_scale = 1.0) {
  Dataset d;
  d.design = Matrix(n, p);
  d.response.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      d.design(i, j) = rng.normal();
      mean += d.design(i, j) * (0.5 + static_cast<double>(j));
    }
    d.response[i] = mean + noise_scale * rng.normal();
  }
  return d;
}

// Normal equations assembled naively and solved by Gaussian elimination.
Vector ols_oracle(const Dataset& d, const std::vector<std::size_t>& rows) {
  const std::size_t p = d.p();
  Matrix gram(p, p, 0.0);
  Vector rhs(p, 0.0);
  for (std::size_t i : rows) {
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = 0; b < p; ++b) gram(a, b) += d.design(i, a) * d.design(i, b);
      rhs[a] += d.design(i, a) * d.response[i];
    }
  }
  return oracle::ge_solve(gram, rhs);
}

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

}  // namespace

TEST_CASE("fit_ols recovers the single-column example") {
  Dataset d = make_dataset(2, 1, {1.0, 1.0}, {2.0, 2.0});
  auto fit = lsq::fit_ols(d);
  CHECK(fit.coefficients[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(fit.residuals[0] == doctest::Approx(0.0));
  CHECK(fit.active_rows == std::vector<std::size_t>{0, 1});
  CHECK(fit.loss.kind == lsq::Loss::squared);
}

TEST_CASE("fit_ols matches the normal-equation oracle on seeded data") {
  lsq::Rng rng(2024u);
  Dataset d = random_dataset(rng, 50, 3);
  auto fit = lsq::fit_ols(d);
  Vector want = ols_oracle(d, iota_rows(50));
  CHECK(oracle::max_abs_diff(fit.coefficients, want) < 1e-10);

  SUBCASE("leverages are in range and sum to the column count") {
    double total = 0.0;
    for (double h : fit.leverages) {
      CHECK(h >= 0.0);
      CHECK(h < 1.0);
      total += h;
    }
    CHECK(total == doctest::Approx(3.0).epsilon(1e-10));
  }
  SUBCASE("residuals are orthogonal to the design") {
    for (std::size_t c = 0; c < 3; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < 50; ++i) s += d.design(i, c) * fit.residuals[i];
      CHECK(std::abs(s) < 1e-9);
    }
  }
}

TEST_CASE("fit_ols rejects collinear columns") {
  Dataset d = make_dataset(4, 2, {1, 2, 2, 4, 3, 6, 4, 8}, {1, 2, 3, 4});
  CHECK_THROWS_AS(lsq::fit_ols(d), lsq::RankDeficient);
}

TEST_CASE("fit_ols rejects fewer rows than columns") {
  lsq::Rng rng(5u);
  Dataset d = random_dataset(rng, 10, 3);
  CHECK_THROWS_AS(lsq::fit_ols(d, {1, 4}), lsq::RankDeficient);
}

TEST_CASE("fit_ols validates row indices and shapes") {
  lsq::Rng rng(6u);
  Dataset d = random_dataset(rng, 8, 2);
  CHECK_THROWS_AS(lsq::fit_ols(d, {0, 1, 99}), lsq::DimensionMismatch);
  CHECK_THROWS_AS(lsq::fit_ols(d, {0, 1, 1}), lsq::DimensionMismatch);
  Dataset bad = d;
  bad.response.pop_back();
  CHECK_THROWS_AS(lsq::fit_ols(bad), lsq::DimensionMismatch);
}

TEST_CASE("fit_ols rejects non-finite entries in used rows only") {
  lsq::Rng rng(7u);
  Dataset d = random_dataset(rng, 8, 2);
  d.response[3] = std::nan("");
  CHECK_THROWS_AS(lsq::fit_ols(d), lsq::NonFiniteValue);
  CHECK_NOTHROW(lsq::fit_ols(d, {0, 1, 2, 4, 5, 6, 7}));
}

TEST_CASE("fit_ols output is invariant to row-set permutation") {
  lsq::Rng rng(88u);
  Dataset d = random_dataset(rng, 20, 3);
  std::vector<std::size_t> rows{17, 2, 9, 4, 11, 0, 6, 13, 5, 8, 19};
  auto shuffled = lsq::fit_ols(d, rows);
  std::sort(rows.begin(), rows.end());
  auto sorted = lsq::fit_ols(d, rows);
  CHECK(shuffled.active_rows == sorted.active_rows);
  CHECK(shuffled.coefficients == sorted.coefficients);
  CHECK(shuffled.residuals == sorted.residuals);
  CHECK(shuffled.leverages == sorted.leverages);
}

TEST_CASE("fitting a row subset equals fitting the materialized subset") {
  lsq::Rng rng(99u);
  Dataset d = random_dataset(rng, 25, 3);
  std::vector<std::size_t> rows{1, 3, 4, 7, 10, 12, 13, 18, 22, 24};

  Dataset sub;
  sub.design = Matrix(rows.size(), 3);
  sub.response.resize(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t c = 0; c < 3; ++c) sub.design(j, c) = d.design(rows[j], c);
    sub.response[j] = d.response[rows[j]];
  }

  auto on_subset = lsq::fit_ols(d, rows);
  auto on_materialized = lsq::fit_ols(sub);
  CHECK(oracle::max_abs_diff(on_subset.coefficients, on_materialized.coefficients) < 1e-12);
  CHECK(oracle::max_abs_diff(on_subset.residuals, on_materialized.residuals) < 1e-12);
  CHECK(oracle::max_abs_diff(on_subset.leverages, on_materialized.leverages) < 1e-12);
}

TEST_CASE("ols_coefficients agrees with fit_ols") {
  lsq::Rng rng(111u);
  Dataset d = random_dataset(rng, 40, 4);
  auto fit = lsq::fit_ols(d);
  Vector lean = lsq::ols_coefficients(d, iota_rows(40));
  CHECK(oracle::max_abs_diff(fit.coefficients, lean) == 0.0);
}

TEST_CASE("loo_effects reproduces the intercept-only example") {
  Dataset d = make_dataset(3, 1, {1.0, 1.0, 1.0}, {0.0, 0.0, 3.0});
  auto fit = lsq::fit_ols(d);
  Vector eff = lsq::loo_effects(fit, d, {1.0});
  REQUIRE(eff.size() == 3);
  CHECK(eff[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(eff[1] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(eff[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("loo_effects matches actual refits, including a high-leverage row") {
  lsq::Rng rng(314u);
  Dataset d = random_dataset(rng, 30, 3);
  for (std::size_t c = 0; c < 3; ++c) d.design(12, c) *= 20.0;
  auto fit = lsq::fit_ols(d);
  Vector v{1.0, -0.5, 2.0};
  Vector eff = lsq::loo_effects(fit, d, v);
  const double full = lsq::dot(v, fit.coefficients);
  for (std::size_t i = 0; i < 30; ++i) {
    std::vector<std::size_t> rest;
    for (std::size_t r = 0; r < 30; ++r)
      if (r != i) rest.push_back(r);
    auto refit = lsq::fit_ols(d, rest);
    const double want = full - lsq::dot(v, refit.coefficients);
    CHECK(std::abs(eff[i] - want) <= 1e-9 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("loo_effects throws on a pivotal row") {
  // Two rows, two columns: both rows are interpolated, leverage 1 each.
  Dataset d = make_dataset(2, 2, {1, 0, 0, 1}, {1.0, 2.0});
  auto fit = lsq::fit_ols(d);
  CHECK_THROWS_AS(lsq::loo_effects(fit, d, {1.0, 0.0}), lsq::PivotalRow);
}

TEST_CASE("influence_scores equal effects damped by one minus leverage") {
  lsq::Rng rng(555u);
  Dataset d = random_dataset(rng, 25, 2);
  auto fit = lsq::fit_ols(d);
  Vector v{1.0, 1.0};
  Vector scores = lsq::influence_scores(fit, d, v);
  Vector effects = lsq::loo_effects(fit, d, v);
  for (std::size_t j = 0; j < scores.size(); ++j) {
    CHECK(std::abs(scores[j] - effects[j]) <= fit.leverages[j] * std::abs(effects[j]) + 1e-12);
    CHECK(scores[j] == doctest::Approx(effects[j] * (1.0 - fit.leverages[j])).epsilon(1e-12));
  }
}

TEST_CASE("fit_huber with a large threshold reproduces least squares") {
  lsq::Rng rng(777u);
  Dataset d = random_dataset(rng, 30, 3);
  auto ols = lsq::fit_ols(d);
  double rmax = 0.0;
  for (double r : ols.residuals) rmax = std::max(rmax, std::abs(r));
  auto hub = lsq::fit_huber(d, lsq::HuberConfig{rmax * 2.0, 200, 1e-9});
  CHECK(oracle::max_abs_diff(hub.coefficients, ols.coefficients) < 1e-8);
  CHECK(hub.loss.kind == lsq::Loss::huber);
  CHECK(hub.iterations >= 1);
}

TEST_CASE("fit_huber pulls a gross outlier's coefficient between the two least squares fits") {
  lsq::Rng rng(808u);
  const std::size_t n = 40;
  Dataset d;
  d.design = Matrix(n, 1);
  d.response.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.design(i, 0) = 1.0 + 0.1 * rng.normal();
    d.response[i] = 2.0 * d.design(i, 0) + 0.3 * rng.normal();
  }
  d.response[0] += 50.0;

  auto with_outlier = lsq::fit_ols(d);
  std::vector<std::size_t> rest;
  for (std::size_t r = 1; r < n; ++r) rest.push_back(r);
  auto without_outlier = lsq::fit_ols(d, rest);
  auto hub = lsq::fit_huber(d, lsq::HuberConfig{});

  const double lo = without_outlier.coefficients[0];
  const double hi = with_outlier.coefficients[0];
  REQUIRE(lo < hi);
  CHECK(hub.coefficients[0] > lo);
  CHECK(hub.coefficients[0] < hi);
}

TEST_CASE("fit_huber satisfies the clipped-residual stationarity condition") {
  lsq::Rng rng(909u);
  Dataset d = random_dataset(rng, 60, 3, 2.5);
  d.response[5] += 30.0;
  d.response[41] -= 25.0;
  const lsq::HuberConfig cfg{1.0, 200, 1e-9};
  auto fit = lsq::fit_huber(d, cfg);

  double ymax = 0.0;
  for (double y : d.response) ymax = std::max(ymax, std::abs(y));
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0;
    for (std::size_t j = 0; j < fit.active_rows.size(); ++j) {
      const double r = fit.residuals[j];
      const double psi = std::clamp(r, -cfg.tau, cfg.tau);
      s += psi * d.design(fit.active_rows[j], c);
    }
    CHECK(std::abs(s) <= 1e-7 * (1.0 + ymax));
  }
}

TEST_CASE("fit_huber reports no convergence when starved of iterations") {
  lsq::Rng rng(1001u);
  Dataset d = random_dataset(rng, 30, 2);
  d.response[0] += 100.0;
  CHECK_THROWS_AS(lsq::fit_huber(d, lsq::HuberConfig{1.0, 1, 1e-12}), lsq::NoConvergence);
}

TEST_CASE("fit_huber validates its configuration") {
  lsq::Rng rng(1002u);
  Dataset d = random_dataset(rng, 10, 2);
  CHECK_THROWS_AS(lsq::fit_huber(d, lsq::HuberConfig{0.0, 200, 1e-9}), lsq::UsageError);
  CHECK_THROWS_AS(lsq::fit_huber(d, lsq::HuberConfig{1.0, 0, 1e-9}), lsq::UsageError);
  CHECK_THROWS_AS(lsq::fit_huber(d, lsq::HuberConfig{1.0, 200, 0.0}), lsq::UsageError);
}

TEST_CASE("a constant response with an intercept column fits exactly under both losses") {
  Dataset d = make_dataset(5, 1, {1, 1, 1, 1, 1}, {4.0, 4.0, 4.0, 4.0, 4.0});
  auto ols = lsq::fit_ols(d);
  auto hub = lsq::fit_huber(d, lsq::HuberConfig{});
  CHECK(ols.coefficients[0] == doctest::Approx(4.0));
  CHECK(hub.coefficients[0] == doctest::Approx(4.0));
  for (double r : ols.residuals) CHECK(r == 0.0);
  CHECK(hub.iterations == 1);
}
