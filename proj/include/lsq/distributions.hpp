#pragma once

#include "lsq/rng.hpp"

namespace lsq {

enum class NoiseKind { gaussian, rademacher, uniform, student_t };

// Noise law for the data generating models. All kinds except student_t are
// normalized to unit variance (uniform means U[-sqrt(3), sqrt(3)]); student_t
// is rescaled to unit variance when df > 2 and left raw otherwise. student_t
// has heavier than sub-gaussian tails, so the distribution-level operations
// below reject it.
struct NoiseDist {
  NoiseKind kind = NoiseKind::gaussian;
  double df = 3.0;

  bool sub_gaussian() const { return kind != NoiseKind::student_t; }
};

double sample_noise(const NoiseDist& dist, Rng& rng);

double normal_pdf(double x);
double normal_cdf(double x);

// The law of W = eps * Z, with Z standard normal independent of eps ~ dist.
// cdf and quantile are accurate to about 1e-9 absolute; quantile takes a
// level in (0, 1). Throws UnsupportedDistribution for student_t noise.
double product_normal_cdf(const NoiseDist& dist, double x);
double product_normal_quantile(const NoiseDist& dist, double level);

// E[W 1(W > q_{1-alpha})], the mean of W on its upper alpha tail, for
// alpha in (0, 1]; alpha = 1 gives E[W] = 0. Throws AlphaOutOfRange.
double truncated_product_moment(const NoiseDist& dist, double alpha);

// Orlicz norms with the threshold-e convention:
// psi1_product_norm is inf{s > 0 : E exp(|eps Z| / s) <= e},
// psi2_norm is inf{t > 0 : E exp(eps^2 / t^2) <= e}.
double psi1_product_norm(const NoiseDist& dist);
double psi2_norm(const NoiseDist& dist);

}  // namespace lsq
