#ifndef DPENET_DISTRIBUTIONS_HPP_
#define DPENET_DISTRIBUTIONS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "dpenet/error.hpp"
#include "dpenet/rng.hpp"

namespace dpenet {

namespace detail {

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ParameterDomainError(std::string(what) + " must be positive and finite, got " +
                               std::to_string(v));
}

// Largest double strictly below 1.
inline constexpr double kBelowOne = 1.0 - 0x1.0p-53;

inline double clamp_open01(double u) {
  return std::clamp(u, std::numeric_limits<double>::min(), kBelowOne);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Standard Gaussian CDF

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

/// log Phi(x), finite for every finite x.
inline double normal_logcdf(double x) {
  if (x >= 0.0) return std::log1p(-0.5 * std::erfc(x * std::numbers::sqrt2 / 2.0));
  if (x > -37.0) return std::log(0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0));
  // Mills-ratio asymptotic series; truncation error below 1e-12 for x <= -37.
  const double r = 1.0 / (x * x);
  const double series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
  return -0.5 * x * x - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

// ---------------------------------------------------------------------------
// Log densities

inline double log_normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

/// Gamma with shape/rate parameterization.
inline double log_gamma_pdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

/// Inverse-Gamma: 1/X ~ Gamma(shape, rate=scale).
inline double log_inv_gamma_pdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

/// log of the regularized upper incomplete gamma Q(a, x), accurate past underflow.
inline double log_gamma_q(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double q = boost::math::gamma_q(a, x);
  if (q > 1e-290) return std::log(q);
  // Q(a,x) ~ x^(a-1) e^-x / Gamma(a) * (1 + (a-1)/x + (a-1)(a-2)/x^2 + ...)
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 12; ++k) {
    term *= (a - k) / x;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return (a - 1.0) * std::log(x) - x - std::lgamma(a) + std::log(sum);
}

/// Inverse-Gamma(shape, scale) restricted to (0,1).
inline double log_trunc_inv_gamma_01_pdf(double x, double shape, double scale) {
  if (!(x > 0.0 && x < 1.0)) return -std::numeric_limits<double>::infinity();
  return log_inv_gamma_pdf(x, shape, scale) - log_gamma_q(shape, scale);
}

// ---------------------------------------------------------------------------
// Samplers

inline double sample_normal(RandomSource& src) {
  // Box-Muller, cosine branch only so the source state is a pure function of draw count.
  const double u1 = src.uniform();
  const double u2 = src.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double sample_uniform(double lo, double hi, RandomSource& src) {
  return lo + (hi - lo) * src.uniform();
}

/// log of a Gamma(shape, 1) draw. Stays finite for shapes where the draw itself underflows.
inline double sample_log_gamma(double shape, RandomSource& src) {
  detail::require_positive(shape, "gamma shape");
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a+1) * U^(1/a)
    const double boosted = sample_log_gamma(shape + 1.0, src);
    return boosted + std::log(src.uniform()) / shape;
  }
  // Marsaglia & Tsang (2000)
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = sample_normal(src);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = src.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return std::log(d * v);
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

inline double sample_gamma(double shape, double rate, RandomSource& src) {
  detail::require_positive(shape, "gamma shape");
  detail::require_positive(rate, "gamma rate");
  const double draw = std::exp(sample_log_gamma(shape, src)) / rate;
  return std::max(draw, std::numeric_limits<double>::min());
}

/// X with 1/X ~ Gamma(shape, rate=scale).
inline double sample_inv_gamma(double shape, double scale, RandomSource& src) {
  detail::require_positive(shape, "inverse-gamma shape");
  detail::require_positive(scale, "inverse-gamma scale");
  const double g = std::exp(sample_log_gamma(shape, src)) / scale;
  return std::min(1.0 / std::max(g, std::numeric_limits<double>::min()),
                  std::numeric_limits<double>::max());
}

namespace detail {

// Y ~ Gamma(shape, rate) conditioned on Y > 1, given the tail mass Q(shape, rate).
inline double gamma_tail_above_one(double shape, double rate, double tail_mass,
                                   RandomSource& src) {
  if (tail_mass > 0.2) {
    for (;;) {
      const double y = std::exp(sample_log_gamma(shape, src)) / rate;
      if (y > 1.0) return y;
    }
  }
  const double target = src.uniform() * tail_mass;
  const double y = boost::math::gamma_q_inv(shape, target) / rate;
  return std::max(y, 1.0 + 0x1.0p-52);
}

}  // namespace detail

/// Inverse-Gamma(shape, scale) conditioned on (0,1). Inverse CDF through the
/// Gamma tail; rejection from the untruncated sampler when the mass exceeds 0.2.
inline double sample_trunc_inv_gamma_01(double shape, double scale, RandomSource& src) {
  detail::require_positive(shape, "truncated inverse-gamma shape");
  detail::require_positive(scale, "truncated inverse-gamma scale");
  const double mass = boost::math::gamma_q(shape, scale);
  if (!(mass >= 1e-300))
    throw DegenerateTruncationError("inverse-gamma mass on (0,1) underflows (shape=" +
                                    std::to_string(shape) + ", scale=" + std::to_string(scale) +
                                    ")");
  const double y = detail::gamma_tail_above_one(shape, scale, mass, src);
  return detail::clamp_open01(1.0 / y);
}

/// Same distribution as sample_trunc_inv_gamma_01, but never degenerate for
/// shape <= 1: when the mass underflows, Y = 1 + E/scale is proposed and
/// accepted with probability Y^(shape-1), which is exact for the Gamma tail.
inline double sample_trunc_inv_gamma_01_robust(double shape, double scale, RandomSource& src) {
  detail::require_positive(shape, "truncated inverse-gamma shape");
  detail::require_positive(scale, "truncated inverse-gamma scale");
  const double mass = boost::math::gamma_q(shape, scale);
  if (mass >= 1e-300) {
    return detail::clamp_open01(1.0 / detail::gamma_tail_above_one(shape, scale, mass, src));
  }
  if (shape > 1.0) return sample_trunc_inv_gamma_01(shape, scale, src);
  for (;;) {
    const double y = 1.0 - std::log(src.uniform()) / scale;
    if (std::log(src.uniform()) <= (shape - 1.0) * std::log(y))
      return detail::clamp_open01(1.0 / y);
  }
}

inline double sample_beta(double a, double b, RandomSource& src) {
  detail::require_positive(a, "beta a");
  detail::require_positive(b, "beta b");
  const double lx = sample_log_gamma(a, src);
  const double ly = sample_log_gamma(b, src);
  // x / (x + y) in log space
  return detail::clamp_open01(1.0 / (1.0 + std::exp(ly - lx)));
}

inline std::vector<double> sample_dirichlet(std::span<const double> concentration,
                                            RandomSource& src) {
  if (concentration.size() < 2)
    throw ParameterDomainError("dirichlet needs at least two concentration entries");
  for (double c : concentration) detail::require_positive(c, "dirichlet concentration");
  std::vector<double> out(concentration.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = sample_log_gamma(concentration[k], src);
  const double top = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) total += (v = std::exp(v - top));
  for (double& v : out) v /= total;
  return out;
}

/// Categorical draw from unnormalized log weights (log-sum-exp guarded).
inline std::size_t sample_categorical_log(std::span<const double> log_weights, RandomSource& src) {
  double top = -std::numeric_limits<double>::infinity();
  for (double w : log_weights) top = std::max(top, w);
  if (!std::isfinite(top))
    throw NumericalCollapseError("all categorical log-weights are -inf or non-finite");
  double total = 0.0;
  for (double w : log_weights) total += std::exp(w - top);
  double target = src.uniform() * total;
  std::size_t last = 0;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    const double w = std::exp(log_weights[k] - top);
    if (w > 0.0) last = k;
    if (target < w) return k;
    target -= w;
  }
  return last;
}

/// Normalized probabilities from log weights.
inline std::vector<double> softmax(std::span<const double> log_weights) {
  double top = -std::numeric_limits<double>::infinity();
  for (double w : log_weights) top = std::max(top, w);
  if (!std::isfinite(top))
    throw NumericalCollapseError("all categorical log-weights are -inf or non-finite");
  std::vector<double> out(log_weights.size());
  double total = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) total += (out[k] = std::exp(log_weights[k] - top));
  for (double& v : out) v /= total;
  return out;
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
inline Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw ShapeError("cholesky of a non-square matrix");
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  // Locate the first failing leading minor for the diagnostic.
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0))
      throw NonPositiveDefiniteError(
          "matrix is not positive definite at leading minor " + std::to_string(j),
          static_cast<std::size_t>(j));
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  throw NonPositiveDefiniteError("matrix is numerically not positive definite", 0);
}

/// Gaussian draw with covariance precision^-1.
inline Eigen::VectorXd sample_mvn_precision(const Eigen::VectorXd& mean,
                                            const Eigen::MatrixXd& precision, RandomSource& src) {
  if (precision.rows() != mean.size() || precision.cols() != mean.size())
    throw ShapeError("precision matrix does not match mean length");
  const double scale = std::max(1.0, precision.cwiseAbs().maxCoeff());
  if (!((precision - precision.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale))
    throw ParameterDomainError("precision matrix is not symmetric");
  const Eigen::MatrixXd l = cholesky_lower(precision);
  Eigen::VectorXd eps(mean.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = sample_normal(src);
  // L^T v = eps  =>  Cov(v) = (L L^T)^-1
  return mean + l.transpose().triangularView<Eigen::Upper>().solve(eps);
}

}  // namespace dpenet

#endif  // DPENET_DISTRIBUTIONS_HPP_
