// Oracles and helpers shared by the test binaries. Nothing here calls into
// the library's samplers or densities, so the checks stay independent.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace oracle {

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size() - 1);
}

/// Standard error of the sample mean.
inline double std_error(const std::vector<double>& v) {
  return std::sqrt(variance(v) / static_cast<double>(v.size()));
}

/// One-sample Kolmogorov-Smirnov distance against a continuous CDF.
inline double ks_distance(std::vector<double> v, const std::function<double(double)>& cdf) {
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = cdf(v[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Asymptotic p-value of the KS statistic (Kolmogorov series with the
/// Stephens small-sample correction).
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Integral of f over [a, b] by adaptive Gauss-Kronrod.
inline double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

/// Integral over [a, b] robust to endpoint singularities.
inline double integrate_singular(const std::function<double(double)>& f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(f, a, b);
}

/// CDF of a density known up to a constant on (a, b), tabulated on a grid and
/// normalized by quadrature. Returns an interpolating function.
inline std::function<double(double)> tabulated_cdf(const std::function<double(double)>& density,
                                                   double a, double b, int cells = 2000) {
  std::vector<double> xs(cells + 1), cum(cells + 1, 0.0);
  for (int i = 0; i <= cells; ++i) xs[i] = a + (b - a) * i / cells;
  for (int i = 1; i <= cells; ++i)
    cum[i] = cum[i - 1] + integrate_singular(density, xs[i - 1], xs[i]);
  const double total = cum.back();
  for (double& c : cum) c /= total;
  return [xs, cum](double x) {
    if (x <= xs.front()) return 0.0;
    if (x >= xs.back()) return 1.0;
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const auto i = static_cast<std::size_t>(it - xs.begin());
    const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return cum[i - 1] + t * (cum[i] - cum[i - 1]);
  };
}

/// Gamma(shape, rate) CDF.
inline double gamma_cdf(double x, double shape, double rate) {
  if (x <= 0.0) return 0.0;
  return boost::math::cdf(boost::math::gamma_distribution<double>(shape, 1.0 / rate), x);
}

/// Inverse-Gamma(shape, scale) CDF.
inline double inv_gamma_cdf(double x, double shape, double scale) {
  if (x <= 0.0) return 0.0;
  return boost::math::cdf(boost::math::complement(
      boost::math::gamma_distribution<double>(shape, 1.0 / scale), 1.0 / x));
}

/// Independent data generator (std::mt19937_64, not the library source).
struct Generator {
  std::mt19937_64 eng;
  explicit Generator(std::uint64_t seed) : eng(seed) {}
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng); }
  Eigen::MatrixXd normal_matrix(int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }
};

/// Ordinary least squares by QR.
inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return X.colPivHouseholderQr().solve(y);
}

/// Lasso by cyclic coordinate descent on (1/2n)|y - Xb|^2 + lambda |b|_1.
inline Eigen::VectorXd lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                             int sweeps = 5000, double tol = 1e-12) {
  const auto n = static_cast<double>(X.rows());
  const auto p = X.cols();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd r = y;
  Eigen::VectorXd norm2(p);
  for (Eigen::Index l = 0; l < p; ++l) norm2[l] = X.col(l).squaredNorm() / n;
  for (int s = 0; s < sweeps; ++s) {
    double delta = 0.0;
    for (Eigen::Index l = 0; l < p; ++l) {
      const double rho = X.col(l).dot(r) / n + norm2[l] * b[l];
      const double shrunk =
          std::copysign(std::max(std::abs(rho) - lambda, 0.0), rho) / norm2[l];
      const double step = shrunk - b[l];
      if (step != 0.0) {
        r -= step * X.col(l);
        b[l] = shrunk;
        delta = std::max(delta, std::abs(step));
      }
    }
    if (delta < tol) break;
  }
  return b;
}

}  // namespace oracle
