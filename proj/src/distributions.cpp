#include "lsq/distributions.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "lsq/errors.hpp"

namespace lsq {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kE = 2.71828182845904523536;

// 20-point Gauss-Legendre rule on [-1, 1]; symmetric, positive half stored.
constexpr std::array<double, 10> kGlNode = {
    0.0765265211334973, 0.2277858511416451, 0.3737060887154195, 0.5108670019508271, 0.6360536807265150,
    0.7463319064601508, 0.8391169718222188, 0.9122344282513259, 0.9639719272779138, 0.9931285991850949};
constexpr std::array<double, 10> kGlWeight = {
    0.1527533871307258, 0.1491729864726037, 0.1420961093183820, 0.1316886384491766, 0.1181945319615184,
    0.1019301198172404, 0.0832767415767048, 0.0626720483341091, 0.0406014298003869, 0.0176140071391521};

template <class F>
double gl_panel(const F& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < kGlNode.size(); ++i)
    s += kGlWeight[i] * (f(mid - half * kGlNode[i]) + f(mid + half * kGlNode[i]));
  return s * half;
}

// Panel count doubles until two successive estimates agree to 1e-9 (relative
// once the value exceeds 1).
template <class F>
double integrate(const F& f, double a, double b) {
  double prev = std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  for (int panels = 1; panels <= (1 << 15); panels <<= 1) {
    const double h = (b - a) / panels;
    double s = 0.0;
    for (int j = 0; j < panels; ++j) s += gl_panel(f, a + j * h, a + (j + 1) * h);
    value = s;
    if (!std::isnan(prev) && std::abs(value - prev) < 1e-9 * std::max(1.0, std::abs(value))) return value;
    prev = value;
  }
  return value;
}

void require_sub_gaussian(const NoiseDist& dist, const char* op) {
  if (!dist.sub_gaussian()) throw UnsupportedDistribution(std::string(op) + ": student_t noise is not supported");
}

// Magnitude of the half-normal tail kept in numeric integrals; the omitted
// mass is below 1e-30.
constexpr double kGaussianCut = 12.0;

}  // namespace

double sample_noise(const NoiseDist& dist, Rng& rng) {
  switch (dist.kind) {
    case NoiseKind::gaussian:
      return rng.normal();
    case NoiseKind::rademacher:
      return rng.rademacher();
    case NoiseKind::uniform:
      return rng.uniform_sym_unit_var();
    case NoiseKind::student_t: {
      const double raw = rng.student_t(dist.df);
      if (dist.df > 2.0) return raw / std::sqrt(dist.df / (dist.df - 2.0));
      return raw;
    }
  }
  throw UsageError("sample_noise: unknown noise kind");
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double product_normal_cdf(const NoiseDist& dist, double x) {
  require_sub_gaussian(dist, "product_normal_cdf");
  switch (dist.kind) {
    case NoiseKind::rademacher:
      // |eps| = 1, so W is standard normal.
      return normal_cdf(x);
    case NoiseKind::gaussian: {
      // E_eps[Phi(x / |eps|)] over the half-normal law of |eps|, written in
      // e = u^2 to keep the integrand resolvable near e = 0 where the
      // conditional cdf snaps between 0, 1/2 and 1.
      auto f = [x](double u) {
        if (u == 0.0) return 0.0;
        const double e = u * u;
        return 4.0 * u * normal_pdf(e) * normal_cdf(x / e);
      };
      return integrate(f, 0.0, std::sqrt(kGaussianCut));
    }
    case NoiseKind::uniform: {
      auto f = [x](double u) {
        if (u == 0.0) return 0.0;
        const double e = u * u;
        return (2.0 * u / kSqrt3) * normal_cdf(x / e);
      };
      return integrate(f, 0.0, std::sqrt(kSqrt3));
    }
    case NoiseKind::student_t:
      break;
  }
  throw UsageError("product_normal_cdf: unknown noise kind");
}

double product_normal_quantile(const NoiseDist& dist, double level) {
  require_sub_gaussian(dist, "product_normal_quantile");
  if (!(level > 0.0 && level < 1.0)) throw UsageError("product_normal_quantile: level must be in (0, 1)");
  double lo = -2.0, hi = 2.0;
  while (product_normal_cdf(dist, lo) >= level) lo *= 2.0;
  while (product_normal_cdf(dist, hi) < level) hi *= 2.0;
  for (int iter = 0; iter < 90 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo)); ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (product_normal_cdf(dist, mid) < level)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double truncated_product_moment(const NoiseDist& dist, double alpha) {
  require_sub_gaussian(dist, "truncated_product_moment");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw AlphaOutOfRange("truncated_product_moment: alpha must be in (0, 1]");
  if (alpha == 1.0) return 0.0;
  const double q = product_normal_quantile(dist, 1.0 - alpha);
  // E[W 1(W > q) | |eps| = e] = e * phi(q / e).
  switch (dist.kind) {
    case NoiseKind::rademacher:
      return normal_pdf(q);
    case NoiseKind::gaussian: {
      auto f = [q](double e) { return e == 0.0 ? 0.0 : 2.0 * e * normal_pdf(q / e) * normal_pdf(e); };
      return integrate(f, 0.0, kGaussianCut);
    }
    case NoiseKind::uniform: {
      auto f = [q](double e) { return e == 0.0 ? 0.0 : e * normal_pdf(q / e) / kSqrt3; };
      return integrate(f, 0.0, kSqrt3);
    }
    case NoiseKind::student_t:
      break;
  }
  throw UsageError("truncated_product_moment: unknown noise kind");
}

namespace {

// E[exp(|eps Z| / s)] computed through
// E[exp(a |Z|)] = 2 exp(a^2 / 2) Phi(a) with a = |eps| / s. The integrands
// fold exp(a^2 / 2) into the density factor so nothing overflows while the
// combined exponent stays negative.
double psi1_mgf(const NoiseDist& dist, double s) {
  switch (dist.kind) {
    case NoiseKind::rademacher:
      return 2.0 * std::exp(0.5 / (s * s)) * normal_cdf(1.0 / s);
    case NoiseKind::gaussian: {
      auto f = [s](double e) {
        const double a = e / s;
        return 2.0 * normal_cdf(a) * std::exp(0.5 * a * a - 0.5 * e * e) * 2.0 / std::sqrt(2.0 * kPi);
      };
      // The combined exponent decays like -e^2 (1 - 1/s^2) / 2; the cut at 64
      // keeps the omitted tail negligible for every s probed at or above the
      // bracket floor of 1.05.
      return integrate(f, 0.0, 64.0);
    }
    case NoiseKind::uniform: {
      auto f = [s](double e) {
        const double a = e / s;
        return 2.0 * normal_cdf(a) * std::exp(0.5 * a * a) / kSqrt3;
      };
      return integrate(f, 0.0, kSqrt3);
    }
    case NoiseKind::student_t:
      break;
  }
  throw UsageError("psi1_product_norm: unknown noise kind");
}

double psi2_mgf_uniform(double t) {
  auto f = [t](double e) { return std::exp(e * e / (t * t)) / kSqrt3; };
  return integrate(f, 0.0, kSqrt3);
}

// Decreasing map m with m(root) = e, solved by bisection on [lo, hi]. The
// bracket self-expands; lo_floor guards maps with a pole (never crossed
// because m is already above e there).
template <class F>
double solve_threshold(const F& m, double lo, double hi, double lo_floor) {
  while (m(hi) > kE) hi *= 2.0;
  while (lo > lo_floor && m(lo) <= kE) lo = std::max(lo_floor, 0.5 * lo);
  for (int iter = 0; iter < 100 && hi - lo > 1e-12 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (m(mid) > kE)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double psi1_product_norm(const NoiseDist& dist) {
  require_sub_gaussian(dist, "psi1_product_norm");
  // The mgf has a pole at s = 1 when the noise is gaussian, so the bracket
  // floor sits just above it; the root lies higher because the mgf is still
  // far above e at the floor. Bounded-|eps| kinds have roots near or below 1
  // and get a floor near zero instead.
  const double lo_floor = dist.kind == NoiseKind::gaussian ? 1.05 : 1e-3;
  return solve_threshold([&](double s) { return psi1_mgf(dist, s); }, lo_floor, 2.0, lo_floor);
}

double psi2_norm(const NoiseDist& dist) {
  require_sub_gaussian(dist, "psi2_norm");
  switch (dist.kind) {
    case NoiseKind::rademacher:
      return 1.0;
    case NoiseKind::gaussian:
      // E exp(Z^2 / t^2) = (1 - 2/t^2)^{-1/2}; setting it to e gives
      // t expressed in closed form.
      return std::sqrt(2.0 / (1.0 - std::exp(-2.0)));
    case NoiseKind::uniform:
      return solve_threshold(psi2_mgf_uniform, 0.3, 2.0, 1e-3);
    case NoiseKind::student_t:
      break;
  }
  throw UsageError("psi2_norm: unknown noise kind");
}

}  // namespace lsq
