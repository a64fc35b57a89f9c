#include "lsq/linalg.hpp"

#include <cmath>

#include "doctest.h"
#include "lsq/errors.hpp"
#include "lsq/rng.hpp"
#include "oracles.hpp"

using lsq::Matrix;
using lsq::Vector;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m(0, 0) = a;
  m(0, 1) = b;
  m(1, 0) = c;
  m(1, 1) = d;
  return m;
}

}  // namespace

TEST_CASE("factor_spd on the identity returns the identity factor") {
  auto f = lsq::factor_spd(Matrix::identity(3));
  CHECK(f.dimension == 3);
  CHECK(oracle::max_abs_diff(f.factor_data, Matrix::identity(3)) == 0.0);
  CHECK(std::abs(f.log_condition_estimate) < 1e-12);
}

TEST_CASE("factor_spd matches the hand-computed factor of [[4,2],[2,3]]") {
  auto f = lsq::factor_spd(mat2(4, 2, 2, 3));
  CHECK(f.factor_data(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(f.factor_data(0, 1) == 0.0);
  CHECK(f.factor_data(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f.factor_data(1, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("factor_spd rejects an indefinite matrix") {
  CHECK_THROWS_AS(lsq::factor_spd(mat2(1, 2, 2, 1)), lsq::NotPositiveDefinite);
}

TEST_CASE("factor_spd rejects non-square input") {
  CHECK_THROWS_AS(lsq::factor_spd(Matrix(2, 3)), lsq::DimensionMismatch);
}

TEST_CASE("solve_spd solves the 2x2 example") {
  auto f = lsq::factor_spd(mat2(4, 2, 2, 3));
  Vector z = lsq::solve_spd(f, {2.0, 1.0});
  CHECK(z[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(z[1]) < 1e-14);
}

TEST_CASE("solve_spd rejects a wrong-sized right hand side") {
  auto f = lsq::factor_spd(Matrix::identity(2));
  CHECK_THROWS_AS(lsq::solve_spd(f, {1.0, 2.0, 3.0}), lsq::DimensionMismatch);
}

TEST_CASE("solve_spd agrees with Gaussian elimination up to dimension 6") {
  lsq::Rng rng(31u);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (int rep = 0; rep < 20; ++rep) {
      Matrix a = oracle::random_spd(rng, n, static_cast<double>(n));
      Vector b(n);
      for (auto& v : b) v = rng.normal();
      Vector got = lsq::solve_spd(lsq::factor_spd(a), b);
      Vector want = oracle::ge_solve(a, b);
      CHECK(oracle::max_abs_diff(got, want) < 1e-9);
    }
  }
}

TEST_CASE("log_condition_estimate tracks a known diagonal matrix") {
  Matrix a(2, 2);
  a(0, 0) = 100.0;
  a(1, 1) = 1.0;
  auto f = lsq::factor_spd(a);
  CHECK(f.log_condition_estimate == doctest::Approx(std::log(100.0)).epsilon(1e-12));
}

TEST_CASE("downdate_inverse with a zero vector is the identity operation") {
  Matrix inv = Matrix::identity(2);
  Matrix out = lsq::downdate_inverse(inv, {0.0, 0.0});
  CHECK(oracle::max_abs_diff(out, inv) == 0.0);
}

TEST_CASE("downdate_inverse matches the 1x1 hand computation") {
  // A = [2], removing x = (1) leaves [1]; inverse goes 0.5 -> 1.
  Matrix inv(1, 1);
  inv(0, 0) = 0.5;
  Matrix out = lsq::downdate_inverse(inv, {1.0});
  CHECK(out(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("downdate_inverse matches refactorization on random 3x3 states") {
  lsq::Rng rng(77u);
  for (int rep = 0; rep < 50; ++rep) {
    Matrix a = oracle::random_spd(rng, 3, 4.0);
    Vector x(3);
    for (auto& v : x) v = rng.normal() * 0.5;
    Matrix inv = lsq::inverse_spd(lsq::factor_spd(a));

    Matrix removed = a;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) removed(i, j) -= x[i] * x[j];
    Matrix want;
    try {
      want = lsq::inverse_spd(lsq::factor_spd(removed));
    } catch (const lsq::NotPositiveDefinite&) {
      continue;
    }
    Matrix got = lsq::downdate_inverse(inv, x);
    CHECK(oracle::max_abs_diff(got, want) < 1e-9);
  }
}

TEST_CASE("chained downdates are order invariant") {
  lsq::Rng rng(123u);
  for (int rep = 0; rep < 50; ++rep) {
    Matrix a = oracle::random_spd(rng, 4, 6.0);
    Vector x(4), z(4);
    for (auto& v : x) v = rng.normal() * 0.4;
    for (auto& v : z) v = rng.normal() * 0.4;
    Matrix inv = lsq::inverse_spd(lsq::factor_spd(a));
    Matrix xz = lsq::downdate_inverse(lsq::downdate_inverse(inv, x), z);
    Matrix zx = lsq::downdate_inverse(lsq::downdate_inverse(inv, z), x);
    CHECK(oracle::max_abs_diff(xz, zx) < 1e-9);
  }
}

TEST_CASE("downdate_inverse reports rank collapse near the singular boundary") {
  // A = [1], removing x with x^2 = 1 - 5e-11 leaves a denominator of 5e-11,
  // below the 1e-10 admissibility floor.
  Matrix inv = Matrix::identity(1);
  CHECK_THROWS_AS(lsq::downdate_inverse(inv, {std::sqrt(1.0 - 5e-11)}), lsq::RankCollapse);
}

TEST_CASE("downdate_inverse rejects shape mismatches") {
  CHECK_THROWS_AS(lsq::downdate_inverse(Matrix::identity(2), {1.0}), lsq::DimensionMismatch);
  CHECK_THROWS_AS(lsq::downdate_inverse(Matrix(2, 3), Vector{1.0, 1.0, 1.0}), lsq::DimensionMismatch);
}

TEST_CASE("inverse_spd inverts against the elimination oracle") {
  lsq::Rng rng(9u);
  for (std::size_t n = 1; n <= 6; ++n) {
    Matrix a = oracle::random_spd(rng, n, static_cast<double>(n));
    Matrix got = lsq::inverse_spd(lsq::factor_spd(a));
    Matrix want = oracle::ge_inverse(a);
    CHECK(oracle::max_abs_diff(got, want) < 1e-9);
  }
}
