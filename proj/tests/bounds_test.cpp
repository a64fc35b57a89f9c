#include "lsq/bounds.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lsq/distributions.hpp"
#include "lsq/errors.hpp"
#include "lsq/rng.hpp"

using lsq::BoundParams;
using lsq::NoiseDist;
using lsq::NoiseKind;
using lsq::Vector;

namespace {

const NoiseDist kGauss{NoiseKind::gaussian, 0.0};
const NoiseDist kSign{NoiseKind::rademacher, 0.0};
const NoiseDist kUnif{NoiseKind::uniform, 0.0};
const NoiseDist kHeavy{NoiseKind::student_t, 3.0};

// Density of the product of two independent standard normals is
// K_0(|w|) / pi; integrating g against it gives an oracle for product-normal
// expectations that never touches the library's conditioning trick. The
// substitution w = u^2 tames the log singularity of K_0 at zero.
template <class G>
double bessel_expectation(const G& g, double hi, int steps) {
  auto f = [&](double u) {
    if (u == 0.0) return 0.0;
    const double w = u * u;
    return g(w) * boost::math::cyl_bessel_k(0, w) / 3.14159265358979323846 * 2.0 * u;
  };
  const double top = std::sqrt(hi);
  const double h = top / steps;
  double s = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double a = i * h;
    s += h / 6.0 * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h));
  }
  return s;
}

}  // namespace

TEST_CASE("truncated_product_moment at one half is 1/pi") {
  CHECK(std::abs(lsq::truncated_product_moment(kGauss, 0.5) - 1.0 / 3.14159265358979323846) < 1e-9);
}

TEST_CASE("truncated_product_moment at alpha = 1 is the plain mean, zero") {
  CHECK(lsq::truncated_product_moment(kGauss, 1.0) == 0.0);
  CHECK(lsq::truncated_product_moment(kSign, 1.0) == 0.0);
  CHECK(lsq::truncated_product_moment(kUnif, 1.0) == 0.0);
}

TEST_CASE("truncated_product_moment matches the small-alpha growth rate") {
  const double alpha = 0.001;
  const double ratio = lsq::truncated_product_moment(kGauss, alpha) / (alpha * std::log(1.0 / alpha));
  CHECK(ratio > 0.7);
  CHECK(ratio < 1.4);
}

TEST_CASE("truncated_product_moment validates alpha and the noise kind") {
  CHECK_THROWS_AS(lsq::truncated_product_moment(kGauss, 0.0), lsq::AlphaOutOfRange);
  CHECK_THROWS_AS(lsq::truncated_product_moment(kGauss, 1.5), lsq::AlphaOutOfRange);
  CHECK_THROWS_AS(lsq::truncated_product_moment(kHeavy, 0.3), lsq::UnsupportedDistribution);
}

TEST_CASE("truncated_product_moment agrees with a Monte Carlo draw") {
  lsq::Rng rng(20260814u);
  for (NoiseDist dist : {kGauss, kUnif}) {
    const double alpha = 0.1;
    const double q = lsq::product_normal_quantile(dist, 1.0 - alpha);
    double acc = 0.0;
    const int draws = 2'000'000;
    for (int i = 0; i < draws; ++i) {
      const double w = lsq::sample_noise(dist, rng) * rng.normal();
      if (w > q) acc += w;
    }
    const double mc = acc / draws;
    const double exact = lsq::truncated_product_moment(dist, alpha);
    CHECK(std::abs(mc - exact) < 0.01 * std::max(0.05, exact));
  }
}

TEST_CASE("product_normal_cdf for sign noise is the normal cdf") {
  for (double x : {-2.0, -0.3, 0.0, 0.7, 1.9}) CHECK(lsq::product_normal_cdf(kSign, x) == lsq::normal_cdf(x));
}

TEST_CASE("product_normal_cdf is symmetric and anchored at one half") {
  for (NoiseDist dist : {kGauss, kUnif}) {
    CHECK(std::abs(lsq::product_normal_cdf(dist, 0.0) - 0.5) < 1e-9);
    for (double x : {0.2, 1.0, 2.5}) {
      const double hi = lsq::product_normal_cdf(dist, x);
      const double lo = lsq::product_normal_cdf(dist, -x);
      CHECK(std::abs(hi + lo - 1.0) < 2e-9);
      CHECK(hi > 0.5);
    }
  }
  CHECK(lsq::product_normal_cdf(kGauss, 40.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("product_normal_cdf matches the Bessel density oracle") {
  for (double x : {0.4, 1.0, 2.2}) {
    // P(0 < W <= x) computed from the K_0 density; the full cdf adds 1/2.
    const double oracle_mass = bessel_expectation([](double) { return 1.0; }, x, 4000);
    CHECK(std::abs(lsq::product_normal_cdf(kGauss, x) - (0.5 + oracle_mass)) < 1e-7);
  }
}

TEST_CASE("product_normal_quantile inverts the cdf") {
  for (NoiseDist dist : {kGauss, kSign, kUnif}) {
    for (double level : {0.01, 0.1, 0.5, 0.75, 0.95, 0.999}) {
      const double q = lsq::product_normal_quantile(dist, level);
      CHECK(std::abs(lsq::product_normal_cdf(dist, q) - level) < 1e-6);
    }
    const double x = 1.3;
    CHECK(std::abs(lsq::product_normal_quantile(dist, lsq::product_normal_cdf(dist, x)) - x) < 1e-6);
  }
  CHECK_THROWS_AS(lsq::product_normal_quantile(kGauss, 0.0), lsq::UsageError);
  CHECK_THROWS_AS(lsq::product_normal_quantile(kGauss, 1.0), lsq::UsageError);
  CHECK_THROWS_AS(lsq::product_normal_quantile(kHeavy, 0.5), lsq::UnsupportedDistribution);
}

TEST_CASE("psi2_norm has the closed-form gaussian value and the unit sign value") {
  CHECK(lsq::psi2_norm(kSign) == 1.0);
  CHECK(lsq::psi2_norm(kGauss) == doctest::Approx(std::sqrt(2.0 / (1.0 - std::exp(-2.0)))).epsilon(1e-12));
  const double u = lsq::psi2_norm(kUnif);
  CHECK(u > 1.0);
  CHECK(u < lsq::psi2_norm(kGauss));
  CHECK_THROWS_AS(lsq::psi2_norm(kHeavy), lsq::UnsupportedDistribution);
}

TEST_CASE("psi1_product_norm solves the threshold equation") {
  SUBCASE("sign noise against the closed-form mgf") {
    const double s = lsq::psi1_product_norm(kSign);
    const double mgf = 2.0 * std::exp(0.5 / (s * s)) * lsq::normal_cdf(1.0 / s);
    CHECK(std::abs(mgf - std::exp(1.0)) < 1e-9);
    CHECK(s > 0.9);
    CHECK(s < 1.1);
  }
  SUBCASE("gaussian noise against the Bessel density oracle") {
    const double s = lsq::psi1_product_norm(kGauss);
    CHECK(s > 1.05);
    CHECK(s < 2.0);
    const double mgf =
        2.0 * bessel_expectation([&](double w) { return std::exp(w / s); }, 150.0, 60000);
    CHECK(std::abs(mgf - std::exp(1.0)) < 1e-4);
  }
  SUBCASE("uniform noise lands between the other two") {
    const double s = lsq::psi1_product_norm(kUnif);
    CHECK(s > lsq::psi1_product_norm(kSign) - 0.05);
    CHECK(s < lsq::psi1_product_norm(kGauss));
  }
}

TEST_CASE("sample_noise is deterministic and unit variance") {
  for (NoiseDist dist : {kGauss, kSign, kUnif, NoiseDist{NoiseKind::student_t, 5.0}}) {
    lsq::Rng a(7u), b(7u);
    for (int i = 0; i < 100; ++i) CHECK(lsq::sample_noise(dist, a) == lsq::sample_noise(dist, b));
    lsq::Rng rng(99u);
    double sum = 0.0, sq = 0.0;
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) {
      const double x = lsq::sample_noise(dist, rng);
      sum += x;
      sq += x * x;
    }
    CHECK(std::abs(sum / draws) < 0.02);
    CHECK(std::abs(sq / draws - 1.0) < 0.05);
  }
}

TEST_CASE("asymptotic_lower_bound is the scaled truncated moment") {
  auto report = lsq::asymptotic_lower_bound(0.25, 1.0, kGauss);
  CHECK(report.value ==
        doctest::Approx(lsq::truncated_product_moment(kGauss, 0.25) * 4.0 / 3.0).epsilon(1e-12));
  CHECK(report.asymptotic);
  CHECK(report.kind == "asymptotic_lower_bound");

  SUBCASE("homogeneous in the direction norm") {
    auto doubled = lsq::asymptotic_lower_bound(0.25, 2.0, kGauss);
    CHECK(doubled.value == doctest::Approx(2.0 * report.value).epsilon(1e-12));
  }
  SUBCASE("strictly increasing in alpha") {
    double prev = 0.0;
    for (double alpha = 0.01; alpha <= 0.301; alpha += 0.01) {
      const double v = lsq::asymptotic_lower_bound(alpha, 1.0, kGauss).value;
      CHECK(v > prev);
      prev = v;
    }
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(lsq::asymptotic_lower_bound(0.0, 1.0, kGauss), lsq::AlphaOutOfRange);
    CHECK_THROWS_AS(lsq::asymptotic_lower_bound(0.5, 1.0, kGauss), lsq::AlphaOutOfRange);
    CHECK_THROWS_AS(lsq::asymptotic_lower_bound(0.25, 1.0, kHeavy), lsq::UnsupportedDistribution);
  }
}

TEST_CASE("finite_sample_lower_bound reduces to the asymptotic value at zero slack") {
  BoundParams params;
  params.n = 1000;
  params.k = 250;
  params.p = 2;
  params.alpha = lsq::removal_fraction(params.k, params.n);
  params.gamma = lsq::dimension_fraction(params.p, params.n, params.k);
  params.t = 0.0;
  params.delta = 0.0;
  auto fs = lsq::finite_sample_lower_bound(params, kGauss);
  auto asym = lsq::asymptotic_lower_bound(0.25, 1.0, kGauss);
  CHECK(fs.value == doctest::Approx(asym.value).epsilon(1e-12));
  CHECK(fs.has_gamma_variant);
  CHECK(fs.value_without_gamma_factor >= fs.value);

  SUBCASE("positive slack costs value and stays below the asymptotic limit") {
    params.t = 0.02;
    params.delta = 0.02;
    auto slack = lsq::finite_sample_lower_bound(params, kGauss);
    CHECK(slack.value < asym.value);
    CHECK(slack.value > 0.0);
    CHECK(slack.value_without_gamma_factor >= slack.value);
  }
}

TEST_CASE("finite_sample_lower_bound probability is the three-term expression") {
  BoundParams params;
  params.n = 100000;
  params.k = 10000;
  params.p = 5;
  params.alpha = 0.1;
  params.gamma = lsq::dimension_fraction(params.p, params.n, params.k);
  params.t = 0.01;
  params.delta = 0.02;
  auto report = lsq::finite_sample_lower_bound(params, kGauss);
  const double n = 100000.0;
  const double want = 1.0 - 13.0 * std::exp(-n * 0.01 * 0.01) -
                      std::pow(2.0, -(n - 10000.0 - 5.0) * 0.02 * 0.02) -
                      3.0 * std::exp(-n * 0.4 * 0.4);
  CHECK(report.probability_raw == doctest::Approx(want).epsilon(1e-12));
  CHECK(report.probability_guarantee == doctest::Approx(want).epsilon(1e-12));
  CHECK(!report.vacuous);
  CHECK(report.probability_guarantee > 0.9);

  SUBCASE("small n leaves the guarantee vacuous but the value intact") {
    params.n = 2000;
    params.k = 200;
    params.gamma = lsq::dimension_fraction(params.p, params.n, params.k);
    auto weak = lsq::finite_sample_lower_bound(params, kGauss);
    CHECK(weak.vacuous);
    CHECK(weak.probability_guarantee == 0.0);
    CHECK(weak.probability_raw < 0.0);
    CHECK(weak.value > 0.0);
  }
}

TEST_CASE("finite_sample_lower_bound validates its inputs") {
  BoundParams params;
  params.n = 1000;
  params.k = 250;
  params.p = 2;
  params.alpha = 0.25;
  params.gamma = lsq::dimension_fraction(2, 1000, 250);

  params.t = 0.25;
  CHECK_THROWS_AS(lsq::finite_sample_lower_bound(params, kGauss), lsq::AlphaOutOfRange);
  params.t = 0.01;
  params.delta = 1.0;
  CHECK_THROWS_AS(lsq::finite_sample_lower_bound(params, kGauss), lsq::LeadingTermNonpositive);
  params.delta = 0.01;
  params.gamma = 1.0;
  CHECK_THROWS_AS(lsq::finite_sample_lower_bound(params, kGauss), lsq::UsageError);
  params.gamma = 0.0;
  CHECK_THROWS_AS(lsq::finite_sample_lower_bound(params, kHeavy), lsq::UnsupportedDistribution);
}

TEST_CASE("finite_sample_lower_bound scales with the noise scale") {
  BoundParams params;
  params.n = 4000;
  params.k = 1000;
  params.p = 2;
  params.alpha = 0.25;
  params.gamma = lsq::dimension_fraction(2, 4000, 1000);
  params.t = 0.02;
  params.delta = 0.02;
  auto unit = lsq::finite_sample_lower_bound(params, kGauss);
  params.noise_scale = 2.5;
  auto scaled = lsq::finite_sample_lower_bound(params, kGauss);
  CHECK(scaled.value == doctest::Approx(2.5 * unit.value).epsilon(1e-12));
}

TEST_CASE("gaussian_upper_bound matches an independent transcription") {
  BoundParams params;
  params.n = 10000;
  params.p = 10;
  params.k = 200;
  params.t = 0.1;
  params.delta = 0.05;
  params.sigma_inv_norm = 1.7;
  params.noise_scale = 0.8;
  auto report = lsq::gaussian_upper_bound(params);

  const double n = 10000.0, p = 10.0, k = 200.0;
  const double L = std::log(std::exp(1.0) * n / k);
  const double rho = std::sqrt(3.0 * k * L / n) + std::sqrt(p / n) + 0.05;
  const double bracket = (6.0 * k * L / n + 2.0 / n * std::sqrt(k * p * L)) * 1.1 * 1.1 +
                         72.0 * std::sqrt(k) * (k + p) * std::pow(L, 1.5) * std::pow(1.1, 3.0) / std::pow(n, 1.5);
  const double want_value = 1.7 * 0.8 / std::pow(1.0 - rho, 4.0) * bracket;
  CHECK(report.value == doctest::Approx(want_value).epsilon(1e-12));
  const double want_raw =
      1.0 - 6.0 * std::pow(std::exp(1.0) * n / k, -k * 0.01) - std::exp(-n / 2.0) - 2.0 * std::exp(-n * 0.05 * 0.05 / 2.0);
  CHECK(report.probability_raw == doctest::Approx(want_raw).epsilon(1e-12));
}

TEST_CASE("gaussian_upper_bound handles the edges") {
  BoundParams params;
  params.n = 1000;
  params.p = 5;
  params.k = 0;
  auto zero = lsq::gaussian_upper_bound(params);
  CHECK(zero.value == 0.0);
  CHECK(zero.probability_guarantee == 1.0);
  CHECK(!zero.vacuous);

  params.k = 400;
  CHECK_THROWS_AS(lsq::gaussian_upper_bound(params), lsq::RhoTooLarge);
  params.k = 600;
  CHECK_THROWS_AS(lsq::gaussian_upper_bound(params), lsq::UsageError);
}

TEST_CASE("gaussian_upper_bound is nondecreasing in the removal budget") {
  BoundParams params;
  params.n = 10000;
  params.p = 10;
  params.t = 0.05;
  params.delta = 0.02;
  double prev = 0.0;
  for (std::size_t k = 1; k <= 100; ++k) {
    params.k = k;
    const double v = lsq::gaussian_upper_bound(params).value;
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("lower and upper bounds sandwich at scale where both guarantees hold") {
  const std::size_t n = 1000000;
  BoundParams lb;
  lb.n = n;
  lb.k = 50000;
  lb.p = 2;
  lb.alpha = 0.05;
  lb.gamma = lsq::dimension_fraction(lb.p, lb.n, lb.k);
  lb.t = 0.0024;
  lb.delta = 0.0061;
  auto lower = lsq::finite_sample_lower_bound(lb, kGauss);

  BoundParams ub = lb;
  ub.t = 0.005;
  ub.delta = 0.05;
  auto upper = lsq::gaussian_upper_bound(ub);

  CHECK(lower.probability_guarantee > 0.9);
  CHECK(upper.probability_guarantee > 0.9);
  CHECK(lower.value > 0.0);
  CHECK(lower.value <= upper.value);
}

TEST_CASE("rate_bounds consistency reproduces the worked example") {
  BoundParams params;
  params.n = 10000;
  params.p = 100;
  params.k = 0;
  params.t = 0.0;
  params.eta_misspec = 1.0;
  params.omega = 1.0;
  auto report = lsq::rate_bounds(lsq::RateKind::consistency, params);
  CHECK(report.value == doctest::Approx(0.11).epsilon(1e-12));
  CHECK(report.kind == "consistency_rate");
  CHECK(report.regime == "I");
}

TEST_CASE("rate_bounds misspec matches its transcription and handles k = 0") {
  BoundParams params;
  params.n = 10000;
  params.p = 50;
  params.k = 100;
  params.t = 0.2;
  params.eta_misspec = 2.0;
  params.omega = 1.2;
  auto report = lsq::rate_bounds(lsq::RateKind::misspec_delta, params);
  const double n = 10000.0, p = 50.0, k = 100.0;
  const double L = std::log(std::exp(1.0) * n / k);
  const double want = 2.0 * (k / n * L + std::sqrt(k * p * L) / n) * 1.2 * 1.2;
  CHECK(report.value == doctest::Approx(want).epsilon(1e-12));
  const double want_raw = 1.0 - 3.0 * std::pow(std::exp(1.0) * n / k, -k * 0.04) -
                          4.0 * std::exp(-n / (1.2 * 1.2 * 1.2 * 1.2));
  CHECK(report.probability_raw == doctest::Approx(want_raw).epsilon(1e-12));

  params.k = 0;
  auto zero = lsq::rate_bounds(lsq::RateKind::misspec_delta, params);
  CHECK(zero.value == 0.0);
  CHECK(zero.probability_guarantee == 1.0);
}

TEST_CASE("rate_bounds rejects heavy-tailed designs through the omega condition") {
  BoundParams params;
  params.n = 100;
  params.p = 64;
  params.k = 10;
  params.eta_misspec = 1.0;
  params.omega = 2.0;
  CHECK_THROWS_AS(lsq::rate_bounds(lsq::RateKind::consistency, params), lsq::ConditionViolated);
  CHECK_THROWS_AS(lsq::rate_bounds(lsq::RateKind::misspec_delta, params), lsq::ConditionViolated);
}

TEST_CASE("classify_regime covers the four quadrants and the cutoff edge") {
  CHECK(lsq::classify_regime(400, 20, 20) == "I");
  CHECK(lsq::classify_regime(400, 100, 20) == "II");
  CHECK(lsq::classify_regime(400, 20, 100) == "III");
  CHECK(lsq::classify_regime(400, 100, 100) == "IV");
  CHECK(lsq::classify_regime(400, 40, 39) == "II");
  CHECK(lsq::classify_regime(400, 40, 40) == "IV");
}

TEST_CASE("sigma helper norms match hand values") {
  lsq::Matrix sigma(2, 2, 0.0);
  sigma(0, 0) = 0.25;
  sigma(1, 1) = 4.0;
  CHECK(lsq::sigma_inv_operator_norm(sigma) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(lsq::sigma_inv_operator_norm(lsq::Matrix::identity(3)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(lsq::sigma_inv_direction_norm(sigma, {1.0, 0.0}) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(lsq::sigma_inv_direction_norm(sigma, {0.0, 2.0}) == doctest::Approx(1.0).epsilon(1e-9));
}
