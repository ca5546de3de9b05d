#ifndef DPENET_MODEL_HPP_
#define DPENET_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpenet/distributions.hpp"
#include "dpenet/error.hpp"
#include "dpenet/log.hpp"
#include "dpenet/rng.hpp"

namespace dpenet {

enum class ResponseKind { raw_score, probability, logit_transformed };

inline const char* to_string(ResponseKind kind) {
  switch (kind) {
    case ResponseKind::raw_score: return "raw_score";
    case ResponseKind::probability: return "probability";
    case ResponseKind::logit_transformed: return "logit_transformed";
  }
  return "unknown";
}

/// Samples of one target class together with the black-box responses.
struct Dataset {
  Eigen::MatrixXd X;  // n x p, rows are samples
  Eigen::VectorXd y;  // n
  std::string class_id;
  ResponseKind response_kind = ResponseKind::raw_score;
  std::vector<std::string> feature_names;  // empty or length p

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }

  bool fit_ready() const { return response_kind != ResponseKind::probability; }

  void validate() const {
    if (X.rows() < 1 || X.cols() < 1) throw ShapeError("dataset needs n >= 1 and p >= 1");
    if (y.size() != X.rows())
      throw ShapeError("response length " + std::to_string(y.size()) + " does not match " +
                       std::to_string(X.rows()) + " samples");
    if (!X.allFinite()) throw ParameterDomainError("feature matrix has non-finite entries");
    if (!y.allFinite()) throw ParameterDomainError("responses have non-finite entries");
    if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != X.cols())
      throw ShapeError("feature_names length does not match p");
    if (response_kind == ResponseKind::probability) {
      for (Eigen::Index i = 0; i < y.size(); ++i)
        if (!(y[i] > 0.0 && y[i] < 1.0))
          throw ResponseDomainError("probability response outside (0,1) at row " +
                                        std::to_string(i),
                                    static_cast<std::size_t>(i));
    }
  }
};

/// Fixed constants of the hierarchy plus the sampler schedule.
///
///   sigma_j^2 ~ Inv-Gamma(a, b)          alpha ~ Gamma(e, f)
///   lambda1_k ~ Gamma(R, V/2)            lambda2_k ~ Gamma(L, V/2)
///
/// Gamma distributions use the rate parameterization throughout.
struct Hyperparameters {
  int J = 20;
  int K = 3;
  double a = 1.0, b = 0.01;
  double e = 1.0, f = 1.0;
  double R = 1.0, L = 1.0, V = 1.0;
  int n_iter = 4000;
  int burn_in = 2000;
  int thin = 1;
  double mh_step_lambda = 0.25;
  double mh_step_sigma = 0.25;
  /// Robbins-Monro tuning of the MH scales, active only before burn_in.
  bool adapt = true;

  void validate() const {
    if (J < 2) throw ConfigError("J must be >= 2");
    if (K < 1) throw ConfigError("K must be >= 1");
    if (n_iter < 1 || burn_in < 0 || burn_in >= n_iter)
      throw ConfigError("need 0 <= burn_in < n_iter");
    if (thin < 1) throw ConfigError("thin must be >= 1");
    for (double v : {a, b, e, f, R, L, V, mh_step_lambda, mh_step_sigma})
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError("prior constants and MH steps must be positive");
  }

  int retained_draws() const { return (n_iter - burn_in) / thin; }
};

/// One full assignment of every latent quantity. Indices are 0-based.
struct ChainState {
  Eigen::VectorXd u;        // J-1 sticks
  Eigen::VectorXd pi;       // J
  double alpha = 1.0;
  Eigen::MatrixXd beta;     // J x p
  Eigen::VectorXd sigma2;   // J
  Eigen::MatrixXd tau;      // J x p, entries in (0,1)
  std::vector<int> z;       // n, in [0, J)
  std::vector<int> c;       // J, in [0, K)
  Eigen::VectorXd w;        // K
  Eigen::VectorXd lambda1;  // K
  Eigen::VectorXd lambda2;  // K

  int J() const { return static_cast<int>(pi.size()); }
  int K() const { return static_cast<int>(w.size()); }
  int p() const { return static_cast<int>(beta.cols()); }
  int n() const { return static_cast<int>(z.size()); }

  bool operator==(const ChainState&) const = default;
};

/// Retained post-burn-in draws of one or more chains.
struct PosteriorChain {
  std::vector<ChainState> draws;
  std::vector<double> loglik;  // mixture log-likelihood of each draw
  Hyperparameters hyper;
  bool relabeled = false;
  std::uint64_t seed = 0;
  std::string class_id;

  bool operator==(const PosteriorChain& o) const {
    return draws == o.draws && loglik == o.loglik && relabeled == o.relabeled && seed == o.seed &&
           class_id == o.class_id;
  }
};

// ---------------------------------------------------------------------------
// Stick breaking

/// pi_1 = u_1, pi_j = u_j prod_{l<j}(1-u_l), pi_J = 1 - sum_{l<J} pi_l.
inline Eigen::VectorXd stick_breaking(const Eigen::VectorXd& u) {
  const Eigen::Index J = u.size() + 1;
  Eigen::VectorXd pi(J);
  double remaining = 1.0;
  double assigned = 0.0;
  for (Eigen::Index j = 0; j + 1 < J; ++j) {
    if (!(u[j] > 0.0 && u[j] < 1.0))
      throw ParameterDomainError("stick fraction u[" + std::to_string(j) + "] outside (0,1)");
    pi[j] = u[j] * remaining;
    remaining *= 1.0 - u[j];
    assigned += pi[j];
  }
  pi[J - 1] = std::max(0.0, 1.0 - assigned);
  return pi;
}

/// Inverse of stick_breaking: u_j = pi_j / (1 - sum_{l<j} pi_l), clamped into (0,1).
inline Eigen::VectorXd sticks_from_weights(const Eigen::VectorXd& pi) {
  const Eigen::Index J = pi.size();
  Eigen::VectorXd u(J - 1);
  double used = 0.0;
  for (Eigen::Index j = 0; j + 1 < J; ++j) {
    const double rest = 1.0 - used;
    u[j] = detail::clamp_open01(rest > 0.0 ? pi[j] / rest : 0.5);
    used += pi[j];
  }
  return u;
}

// ---------------------------------------------------------------------------
// Dataset preparation

inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LogitOptions {
  /// When set, responses equal to exactly 0 or 1 are clipped to [eps, 1-eps].
  std::optional<double> clip_epsilon;
};

inline Dataset logit_transform(const Dataset& data, const LogitOptions& opts = {}) {
  if (data.response_kind != ResponseKind::probability)
    throw ParameterDomainError("logit_transform expects probability responses");
  Dataset out = data;
  std::size_t clipped = 0;
  for (Eigen::Index i = 0; i < out.y.size(); ++i) {
    double v = out.y[i];
    if (opts.clip_epsilon && (v == 0.0 || v == 1.0)) {
      v = std::clamp(v, *opts.clip_epsilon, 1.0 - *opts.clip_epsilon);
      ++clipped;
    }
    if (!(v > 0.0 && v < 1.0))
      throw ResponseDomainError("response at row " + std::to_string(i) +
                                    " is outside (0,1): " + std::to_string(out.y[i]),
                                static_cast<std::size_t>(i));
    out.y[i] = logit(v);
  }
  if (clipped > 0)
    log::warn(std::to_string(clipped) + " saturated probabilities clipped before logit (class " +
              data.class_id + ")");
  out.response_kind = ResponseKind::logit_transformed;
  return out;
}

/// Per-feature affine map applied before fitting. Coefficients fitted on the
/// transformed features are mapped back with `coefficient_to_raw`.
struct Standardization {
  Eigen::VectorXd mean;   // subtracted (zero when not centering)
  Eigen::VectorXd scale;  // divided; 1 for constant columns
  std::vector<bool> constant;
  double response_offset = 0.0;
  bool centered = false;

  static Standardization identity(Eigen::Index p) {
    Standardization s;
    s.mean = Eigen::VectorXd::Zero(p);
    s.scale = Eigen::VectorXd::Ones(p);
    s.constant.assign(static_cast<std::size_t>(p), false);
    return s;
  }

  /// Unit sample standard deviation per column; `center` additionally
  /// removes column means and the response mean.
  static Standardization fit(const Dataset& data, bool center) {
    const Eigen::Index p = data.p();
    const auto n = static_cast<double>(data.n());
    Standardization s = identity(p);
    s.centered = center;
    for (Eigen::Index l = 0; l < p; ++l) {
      const double mu = data.X.col(l).mean();
      const double var = (data.X.col(l).array() - mu).square().sum() / std::max(1.0, n - 1.0);
      const double sd = std::sqrt(var);
      if (!(sd > 1e-12 * std::max(1.0, std::abs(mu)))) {
        s.constant[static_cast<std::size_t>(l)] = true;
      } else {
        s.scale[l] = sd;
        if (center) s.mean[l] = mu;
      }
    }
    if (center) s.response_offset = data.y.mean();
    return s;
  }

  Dataset apply(const Dataset& data) const {
    Dataset out = data;
    out.X = (data.X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    out.y = data.y.array() - response_offset;
    return out;
  }

  /// Raw-unit coefficient row and intercept from a standardized-space row.
  Eigen::VectorXd coefficient_to_raw(const Eigen::VectorXd& beta) const {
    return beta.array() / scale.array();
  }
  double intercept_to_raw(const Eigen::VectorXd& beta) const {
    return response_offset - coefficient_to_raw(beta).dot(mean);
  }
};

// ---------------------------------------------------------------------------
// Chain state checks and initialization

/// Throws NumericalCollapseError naming the first violated invariant.
inline void check_state(const ChainState& s, int n, int p, int J, int K) {
  auto fail = [](const std::string& what) { throw NumericalCollapseError("invalid state: " + what); };
  if (s.u.size() != J - 1 || s.pi.size() != J || s.beta.rows() != J || s.beta.cols() != p ||
      s.sigma2.size() != J || s.tau.rows() != J || s.tau.cols() != p ||
      static_cast<int>(s.z.size()) != n || static_cast<int>(s.c.size()) != J || s.w.size() != K ||
      s.lambda1.size() != K || s.lambda2.size() != K)
    fail("dimension mismatch");
  for (Eigen::Index j = 0; j < s.u.size(); ++j)
    if (!(s.u[j] > 0.0 && s.u[j] < 1.0)) fail("u outside (0,1)");
  if ((stick_breaking(s.u) - s.pi).cwiseAbs().maxCoeff() > 1e-12) fail("pi != stick_breaking(u)");
  if (std::abs(s.pi.sum() - 1.0) > 1e-12 || (s.pi.array() < 0.0).any()) fail("pi not on simplex");
  if (std::abs(s.w.sum() - 1.0) > 1e-12 || (s.w.array() < 0.0).any()) fail("w not on simplex");
  if (!(s.alpha > 0.0) || !std::isfinite(s.alpha)) fail("alpha not positive");
  if (!s.beta.allFinite()) fail("beta not finite");
  if (!((s.sigma2.array() > 0.0).all() && s.sigma2.allFinite())) fail("sigma2 not positive");
  if (!((s.tau.array() > 0.0).all() && (s.tau.array() < 1.0).all())) fail("tau outside (0,1)");
  if (!((s.lambda1.array() > 0.0).all() && s.lambda1.allFinite())) fail("lambda1 not positive");
  if (!((s.lambda2.array() > 0.0).all() && s.lambda2.allFinite())) fail("lambda2 not positive");
  for (int zi : s.z)
    if (zi < 0 || zi >= J) fail("z out of range");
  for (int cj : s.c)
    if (cj < 0 || cj >= K) fail("c out of range");
}

/// Draw tau_jl from its prior given (sigma2_j, lambda1, lambda2).
inline double tau_prior_scale(double sigma2, double lambda1, double lambda2) {
  // (1/2) * (lambda1 / (2 sigma sqrt(lambda2)))^2
  return lambda1 * lambda1 / (8.0 * sigma2 * lambda2);
}

/// Initial state: z by response-quantile bins, beta by per-bin ridge-damped
/// least squares, everything else from the prior.
inline ChainState init_state(const Dataset& data, const Hyperparameters& hyper,
                             RandomSource& src) {
  data.validate();
  hyper.validate();
  const int n = static_cast<int>(data.n());
  const int p = static_cast<int>(data.p());
  const int J = hyper.J;
  const int K = hyper.K;
  ChainState s;

  s.alpha = sample_gamma(hyper.e, hyper.f, src);
  s.u.resize(J - 1);
  for (int j = 0; j + 1 < J; ++j) s.u[j] = sample_beta(1.0, s.alpha, src);
  s.pi = stick_breaking(s.u);

  std::vector<double> conc(static_cast<std::size_t>(K), 1.0 / K);
  if (K >= 2) {
    const auto w = sample_dirichlet(conc, src);
    s.w = Eigen::Map<const Eigen::VectorXd>(w.data(), K);
  } else {
    s.w = Eigen::VectorXd::Ones(1);
  }
  s.lambda1.resize(K);
  s.lambda2.resize(K);
  for (int k = 0; k < K; ++k) {
    s.lambda1[k] = sample_gamma(hyper.R, hyper.V / 2.0, src);
    s.lambda2[k] = sample_gamma(hyper.L, hyper.V / 2.0, src);
  }
  s.c.resize(J);
  std::vector<double> logw(K);
  for (int k = 0; k < K; ++k) logw[k] = std::log(s.w[k]);
  for (int j = 0; j < J; ++j) s.c[j] = static_cast<int>(sample_categorical_log(logw, src));

  s.sigma2.resize(J);
  for (int j = 0; j < J; ++j) s.sigma2[j] = sample_inv_gamma(hyper.a, hyper.b, src);
  s.tau.resize(J, p);
  for (int j = 0; j < J; ++j) {
    const int k = s.c[j];
    const double scale = tau_prior_scale(s.sigma2[j], s.lambda1[k], s.lambda2[k]);
    for (int l = 0; l < p; ++l) s.tau(j, l) = sample_trunc_inv_gamma_01_robust(0.5, scale, src);
  }

  s.z.assign(n, 0);
  if (n < J) {
    log::warn("n=" + std::to_string(n) + " < J=" + std::to_string(J) +
              "; all samples start in component 0");
  } else {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return data.y[x] < data.y[y]; });
    for (int r = 0; r < n; ++r)
      s.z[order[r]] = static_cast<int>(static_cast<long long>(r) * J / n);
  }

  s.beta = Eigen::MatrixXd::Zero(J, p);
  for (int j = 0; j < J; ++j) {
    std::vector<int> rows;
    for (int i = 0; i < n; ++i)
      if (s.z[i] == j) rows.push_back(i);
    if (rows.empty()) continue;
    const Eigen::MatrixXd Xj = data.X(rows, Eigen::all);
    const Eigen::VectorXd yj = data.y(rows);
    Eigen::MatrixXd gram = Xj.transpose() * Xj;
    gram.diagonal().array() += 1e-6;
    s.beta.row(j) = gram.ldlt().solve(Xj.transpose() * yj).transpose();
  }
  check_state(s, n, p, J, K);
  return s;
}

}  // namespace dpenet

#endif  // DPENET_MODEL_HPP_
