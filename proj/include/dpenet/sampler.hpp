#ifndef DPENET_SAMPLER_HPP_
#define DPENET_SAMPLER_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpenet/distributions.hpp"
#include "dpenet/error.hpp"
#include "dpenet/model.hpp"
#include "dpenet/rng.hpp"

// Gibbs sweep with Metropolis-Hastings sub-steps for the truncated
// Dirichlet-process regression mixture with multiple elastic-net priors:
//
//   y_i | z_i = j        ~ N(x_i . beta_j, sigma_j^2)
//   z_i                  ~ Cat(pi),  pi = stick_breaking(u),  u_j ~ Beta(1, alpha)
//   beta_j | tau_j, ...  ~ N(0, sigma_j^2 / lambda2_{c_j} * diag(1 - tau_j))
//   tau_jl | ...         ~ Inv-Gamma_(0,1)(1/2, (1/2)(lambda1 / (2 sigma sqrt(lambda2)))^2)
//   c_j                  ~ Cat(w),  w ~ Dir(1/K)
//
// Conjugate blocks (z, u, alpha, beta, c, w) are exact Gibbs draws; tau,
// sigma^2 and the lambdas are MH steps against the joint density above.
namespace dpenet::sampler {

struct SweepDiagnostics {
  int iteration = 0;
  double loglik = 0.0;
  double accept_lambda1 = 0.0;
  double accept_lambda2 = 0.0;
  double accept_sigma2 = 0.0;
  int occupied_components = 0;
};

/// Block switches and test hooks. Everything on by default.
struct SamplerOptions {
  bool update_z = true;
  bool update_sticks = true;
  bool update_alpha = true;
  bool update_beta = true;
  bool update_tau = true;
  bool update_sigma2 = true;
  bool update_c = true;
  bool update_w = true;
  bool update_lambdas = true;
  /// When false, the sigma^2 target drops the beta and tau prior factors,
  /// leaving the conjugate Inv-Gamma posterior.
  bool sigma2_coef_prior = true;
};

/// Log-scale random-walk step sizes, one per MH-updated scalar.
struct MhScales {
  Eigen::VectorXd sigma2;   // J
  Eigen::VectorXd lambda1;  // K
  Eigen::VectorXd lambda2;  // K

  static MhScales from(const Hyperparameters& h) {
    return {Eigen::VectorXd::Constant(h.J, h.mh_step_sigma),
            Eigen::VectorXd::Constant(h.K, h.mh_step_lambda),
            Eigen::VectorXd::Constant(h.K, h.mh_step_lambda)};
  }
};

struct Acceptance {
  long accepted = 0;
  long proposed = 0;
  double rate() const { return proposed == 0 ? 0.0 : static_cast<double>(accepted) / proposed; }
  void record(bool ok) {
    ++proposed;
    accepted += ok ? 1 : 0;
  }
};

// ---------------------------------------------------------------------------
// Densities shared by several blocks

/// Mixture log-likelihood sum_i log sum_j pi_j N(y_i | x_i beta_j, sigma_j^2).
inline double mixture_loglik(const ChainState& s, const Dataset& data) {
  const Eigen::MatrixXd mu = data.X * s.beta.transpose();
  const int J = s.J();
  std::vector<double> lw(static_cast<std::size_t>(J));
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < J; ++j) {
      lw[j] = std::log(s.pi[j]) + log_normal_pdf(data.y[i], mu(i, j), s.sigma2[j]);
      top = std::max(top, lw[j]);
    }
    if (!std::isfinite(top)) return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (double v : lw) acc += std::exp(v - top);
    total += top + std::log(acc);
  }
  return total;
}

/// log p(beta_j, tau_j | sigma_j^2, lambda1, lambda2) under the augmented
/// elastic-net prior, including every normalizing constant.
inline double log_coef_prior(const Eigen::Ref<const Eigen::RowVectorXd>& beta,
                             const Eigen::Ref<const Eigen::RowVectorXd>& tau, double sigma2,
                             double lambda1, double lambda2) {
  const auto p = static_cast<double>(beta.size());
  const double sigma = std::sqrt(sigma2);
  const double t = lambda1 / (2.0 * sigma * std::sqrt(lambda2));
  const double gamma = 0.5 * t * t;
  // Mass of Inv-Gamma(1/2, gamma) on (0,1) is 2 Phi(-t).
  const double log_mass = std::numbers::ln2 + normal_logcdf(-t);
  double acc = p * (0.5 * std::log(gamma) - 0.5 * std::log(std::numbers::pi) - log_mass);
  acc -= 0.5 * p * std::log(2.0 * std::numbers::pi * sigma2 / lambda2);
  for (Eigen::Index l = 0; l < beta.size(); ++l) {
    const double tl = tau[l];
    const double one_minus = 1.0 - tl;
    acc += -1.5 * std::log(tl) - gamma / tl;
    acc += -0.5 * std::log(one_minus) - lambda2 * beta[l] * beta[l] / (2.0 * sigma2 * one_minus);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Per-component sufficient statistics

struct ComponentStats {
  std::vector<Eigen::MatrixXd> gram;  // X_j^T X_j
  std::vector<Eigen::VectorXd> xty;   // X_j^T y_j
  Eigen::VectorXd yty;                // y_j^T y_j
  std::vector<int> count;

  static ComponentStats compute(const ChainState& s, const Dataset& data) {
    const int J = s.J();
    const auto p = data.p();
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(J));
    for (int i = 0; i < static_cast<int>(s.z.size()); ++i) rows[s.z[i]].push_back(i);
    ComponentStats st;
    st.gram.resize(J);
    st.xty.resize(J);
    st.yty = Eigen::VectorXd::Zero(J);
    st.count.resize(J);
    for (int j = 0; j < J; ++j) {
      st.count[j] = static_cast<int>(rows[j].size());
      if (rows[j].empty()) {
        st.gram[j] = Eigen::MatrixXd::Zero(p, p);
        st.xty[j] = Eigen::VectorXd::Zero(p);
        continue;
      }
      const Eigen::MatrixXd Xj = data.X(rows[j], Eigen::all);
      const Eigen::VectorXd yj = data.y(rows[j]);
      st.gram[j] = Xj.transpose() * Xj;
      st.xty[j] = Xj.transpose() * yj;
      st.yty[j] = yj.squaredNorm();
    }
    return st;
  }

  /// Residual sum of squares of component j at coefficients beta.
  double rss(int j, const Eigen::VectorXd& beta) const {
    if (count[j] == 0) return 0.0;
    return std::max(0.0, yty[j] - 2.0 * beta.dot(xty[j]) + beta.dot(gram[j] * beta));
  }
};

// ---------------------------------------------------------------------------
// z

/// Unnormalized log Pr(z_i = j) for every j.
inline std::vector<double> z_log_weights(const ChainState& s, const Dataset& data,
                                         Eigen::Index i) {
  const int J = s.J();
  std::vector<double> lw(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j)
    lw[j] = std::log(s.pi[j]) +
            log_normal_pdf(data.y[i], data.X.row(i).dot(s.beta.row(j)), s.sigma2[j]);
  return lw;
}

inline void update_z(ChainState& s, const Dataset& data, RandomSource& src) {
  const Eigen::MatrixXd mu = data.X * s.beta.transpose();
  const int J = s.J();
  std::vector<double> log_pi(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) log_pi[j] = std::log(s.pi[j]);
  std::vector<double> lw(static_cast<std::size_t>(J));
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (int j = 0; j < J; ++j)
      lw[j] = log_pi[j] + log_normal_pdf(data.y[i], mu(i, j), s.sigma2[j]);
    try {
      s.z[i] = static_cast<int>(sample_categorical_log(lw, src));
    } catch (const NumericalCollapseError&) {
      throw NumericalCollapseError("every component has zero likelihood for sample " +
                                   std::to_string(i));
    }
  }
}

// ---------------------------------------------------------------------------
// sticks and alpha

inline std::vector<int> component_counts(const ChainState& s) {
  std::vector<int> counts(static_cast<std::size_t>(s.J()), 0);
  for (int zi : s.z) ++counts[zi];
  return counts;
}

/// u_j ~ Beta(1 + n_j, alpha + sum_{l>j} n_l); pi recomputed from u.
inline void update_sticks(ChainState& s, RandomSource& src) {
  const auto counts = component_counts(s);
  const int J = s.J();
  long tail = 0;
  for (int c : counts) tail += c;
  for (int j = 0; j + 1 < J; ++j) {
    tail -= counts[j];
    s.u[j] = sample_beta(1.0 + counts[j], s.alpha + static_cast<double>(tail), src);
  }
  s.pi = stick_breaking(s.u);
}

/// alpha ~ Gamma(e + J - 1, f - sum log(1 - u_l)).
inline void update_alpha(ChainState& s, const Hyperparameters& hyper, RandomSource& src) {
  double rate = hyper.f;
  for (Eigen::Index l = 0; l < s.u.size(); ++l) rate -= std::log1p(-s.u[l]);
  s.alpha = sample_gamma(hyper.e + static_cast<double>(s.u.size()), rate, src);
}

// ---------------------------------------------------------------------------
// beta

struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
};

/// Full conditional of beta_j:
///   P = (X_j^T X_j + lambda2 S_tau^-1) / sigma^2,  mean = P^-1 X_j^T y_j / sigma^2.
inline GaussianConditional beta_conditional(const ChainState& s, const ComponentStats& st,
                                            int j) {
  const double sigma2 = s.sigma2[j];
  const double lambda2 = s.lambda2[s.c[j]];
  Eigen::MatrixXd precision = st.gram[j];
  precision.diagonal().array() += lambda2 / (1.0 - s.tau.row(j).transpose().array());
  precision /= sigma2;
  const Eigen::VectorXd rhs = st.xty[j] / sigma2;
  const Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) cholesky_lower(precision);  // throws with the minor index
  return {llt.solve(rhs), precision};
}

inline void update_beta(ChainState& s, const ComponentStats& st, RandomSource& src) {
  for (int j = 0; j < s.J(); ++j) {
    const auto cond = beta_conditional(s, st, j);
    s.beta.row(j) = sample_mvn_precision(cond.mean, cond.precision, src).transpose();
  }
}

inline void update_beta(ChainState& s, const Dataset& data, RandomSource& src) {
  update_beta(s, ComponentStats::compute(s, data), src);
}

// ---------------------------------------------------------------------------
// tau

/// Independence MH with the truncated inverse-Gamma prior as proposal; the
/// ratio reduces to the Gaussian factor (1-tau)^-1/2 exp(-lambda2 beta^2 / (2 sigma^2 (1-tau))).
inline Acceptance update_tau(ChainState& s, RandomSource& src) {
  Acceptance acc;
  for (int j = 0; j < s.J(); ++j) {
    const int k = s.c[j];
    const double sigma2 = s.sigma2[j];
    const double lambda2 = s.lambda2[k];
    const double scale = tau_prior_scale(sigma2, s.lambda1[k], lambda2);
    for (int l = 0; l < s.p(); ++l) {
      const double b2 = s.beta(j, l) * s.beta(j, l);
      auto log_factor = [&](double t) {
        return -0.5 * std::log1p(-t) - lambda2 * b2 / (2.0 * sigma2 * (1.0 - t));
      };
      const double proposal = sample_trunc_inv_gamma_01_robust(0.5, scale, src);
      const double log_ratio = log_factor(proposal) - log_factor(s.tau(j, l));
      const bool ok = log_ratio >= 0.0 || std::log(src.uniform()) < log_ratio;
      if (ok) s.tau(j, l) = proposal;
      acc.record(ok);
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------
// sigma^2

/// Unnormalized log full conditional of sigma_j^2 at `sigma2`.
inline double log_sigma2_target(const ChainState& s, const ComponentStats& st,
                                const Hyperparameters& hyper, int j, double sigma2,
                                bool coef_prior = true) {
  const double rss = st.rss(j, s.beta.row(j).transpose());
  double lp = log_inv_gamma_pdf(sigma2, hyper.a, hyper.b);
  lp += -0.5 * st.count[j] * std::log(2.0 * std::numbers::pi * sigma2) - rss / (2.0 * sigma2);
  if (coef_prior) {
    const int k = s.c[j];
    lp += log_coef_prior(s.beta.row(j), s.tau.row(j), sigma2, s.lambda1[k], s.lambda2[k]);
  }
  return lp;
}

/// Random walk on log sigma^2 (the +log sigma^2 term is the Jacobian).
inline Acceptance update_sigma2(ChainState& s, const ComponentStats& st,
                                const Hyperparameters& hyper, const Eigen::VectorXd& steps,
                                RandomSource& src, bool coef_prior = true,
                                std::vector<bool>* accepted = nullptr) {
  Acceptance acc;
  if (accepted) accepted->assign(static_cast<std::size_t>(s.J()), false);
  for (int j = 0; j < s.J(); ++j) {
    const double current = s.sigma2[j];
    const double proposal = current * std::exp(steps[j] * sample_normal(src));
    bool ok = false;
    if (proposal > 0.0 && std::isfinite(proposal)) {
      const double log_ratio =
          log_sigma2_target(s, st, hyper, j, proposal, coef_prior) + std::log(proposal) -
          log_sigma2_target(s, st, hyper, j, current, coef_prior) - std::log(current);
      ok = log_ratio >= 0.0 || std::log(src.uniform()) < log_ratio;
    }
    if (ok) s.sigma2[j] = proposal;
    if (accepted) (*accepted)[j] = ok;
    acc.record(ok);
  }
  return acc;
}

inline Acceptance update_sigma2(ChainState& s, const Dataset& data, const Hyperparameters& hyper,
                                RandomSource& src, bool coef_prior = true) {
  return update_sigma2(s, ComponentStats::compute(s, data), hyper,
                       Eigen::VectorXd::Constant(s.J(), hyper.mh_step_sigma), src, coef_prior);
}

// ---------------------------------------------------------------------------
// c and w

inline std::vector<double> c_log_weights(const ChainState& s, int j) {
  std::vector<double> lw(static_cast<std::size_t>(s.K()));
  for (int k = 0; k < s.K(); ++k)
    lw[k] = std::log(s.w[k]) + log_coef_prior(s.beta.row(j), s.tau.row(j), s.sigma2[j],
                                              s.lambda1[k], s.lambda2[k]);
  return lw;
}

inline void update_c(ChainState& s, RandomSource& src) {
  if (s.K() == 1) {
    std::fill(s.c.begin(), s.c.end(), 0);
    return;
  }
  for (int j = 0; j < s.J(); ++j) {
    try {
      s.c[j] = static_cast<int>(sample_categorical_log(c_log_weights(s, j), src));
    } catch (const NumericalCollapseError&) {
      throw NumericalCollapseError("no elastic-net state has positive density for component " +
                                   std::to_string(j));
    }
  }
}

/// w ~ Dir(1/K + m_1, ..., 1/K + m_K).
inline void update_w(ChainState& s, RandomSource& src) {
  const int K = s.K();
  if (K == 1) {
    s.w = Eigen::VectorXd::Ones(1);
    return;
  }
  std::vector<double> conc(static_cast<std::size_t>(K), 1.0 / K);
  for (int cj : s.c) conc[cj] += 1.0;
  const auto w = sample_dirichlet(conc, src);
  s.w = Eigen::Map<const Eigen::VectorXd>(w.data(), K);
}

// ---------------------------------------------------------------------------
// lambdas

/// Unnormalized log full conditional of (lambda1_k, lambda2_k).
inline double log_lambda_target(const ChainState& s, const Hyperparameters& hyper, int k,
                                double lambda1, double lambda2) {
  double lp = log_gamma_pdf(lambda1, hyper.R, hyper.V / 2.0) +
              log_gamma_pdf(lambda2, hyper.L, hyper.V / 2.0);
  for (int j = 0; j < s.J(); ++j)
    if (s.c[j] == k) lp += log_coef_prior(s.beta.row(j), s.tau.row(j), s.sigma2[j], lambda1, lambda2);
  return lp;
}

struct LambdaAcceptance {
  Acceptance lambda1;
  Acceptance lambda2;
  std::vector<bool> last1, last2;  // per-k outcome of this call
};

/// Separate log-scale random walks on lambda1_k then lambda2_k.
inline LambdaAcceptance update_lambdas(ChainState& s, const Hyperparameters& hyper,
                                       const MhScales& scales, RandomSource& src) {
  LambdaAcceptance out;
  const int K = s.K();
  out.last1.assign(static_cast<std::size_t>(K), false);
  out.last2.assign(static_cast<std::size_t>(K), false);
  auto step = [&](int k, bool first) {
    double& value = first ? s.lambda1[k] : s.lambda2[k];
    const double other = first ? s.lambda2[k] : s.lambda1[k];
    const double scale = first ? scales.lambda1[k] : scales.lambda2[k];
    const double current = value;
    const double proposal = current * std::exp(scale * sample_normal(src));
    bool ok = false;
    if (proposal > 0.0 && std::isfinite(proposal)) {
      const double lp_new = first ? log_lambda_target(s, hyper, k, proposal, other)
                                  : log_lambda_target(s, hyper, k, other, proposal);
      const double lp_old = first ? log_lambda_target(s, hyper, k, current, other)
                                  : log_lambda_target(s, hyper, k, other, current);
      const double log_ratio = lp_new + std::log(proposal) - lp_old - std::log(current);
      ok = log_ratio >= 0.0 || std::log(src.uniform()) < log_ratio;
    }
    if (ok) value = proposal;
    (first ? out.lambda1 : out.lambda2).record(ok);
    (first ? out.last1 : out.last2)[k] = ok;
  };
  for (int k = 0; k < K; ++k) {
    step(k, true);
    step(k, false);
  }
  return out;
}

inline LambdaAcceptance update_lambdas(ChainState& s, const Hyperparameters& hyper,
                                       RandomSource& src) {
  return update_lambdas(s, hyper, MhScales::from(hyper), src);
}

// ---------------------------------------------------------------------------
// Prior simulation (used for joint-distribution testing and synthetic data)

/// Every latent drawn from its prior; z drawn from Cat(pi) for n samples.
inline ChainState sample_prior_state(const Hyperparameters& hyper, int n, int p,
                                     RandomSource& src) {
  const int J = hyper.J, K = hyper.K;
  ChainState s;
  s.alpha = sample_gamma(hyper.e, hyper.f, src);
  s.u.resize(J - 1);
  for (int j = 0; j + 1 < J; ++j) s.u[j] = sample_beta(1.0, s.alpha, src);
  s.pi = stick_breaking(s.u);
  if (K >= 2) {
    std::vector<double> conc(static_cast<std::size_t>(K), 1.0 / K);
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
  std::vector<double> logw(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) logw[k] = std::log(s.w[k]);
  s.c.resize(J);
  for (int j = 0; j < J; ++j) s.c[j] = static_cast<int>(sample_categorical_log(logw, src));
  s.sigma2.resize(J);
  s.tau.resize(J, p);
  s.beta.resize(J, p);
  for (int j = 0; j < J; ++j) {
    s.sigma2[j] = sample_inv_gamma(hyper.a, hyper.b, src);
    const int k = s.c[j];
    const double scale = tau_prior_scale(s.sigma2[j], s.lambda1[k], s.lambda2[k]);
    for (int l = 0; l < p; ++l) {
      s.tau(j, l) = sample_trunc_inv_gamma_01_robust(0.5, scale, src);
      const double var = s.sigma2[j] * (1.0 - s.tau(j, l)) / s.lambda2[k];
      s.beta(j, l) = std::sqrt(var) * sample_normal(src);
    }
  }
  std::vector<double> log_pi(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) log_pi[j] = std::log(s.pi[j]);
  s.z.resize(n);
  for (int i = 0; i < n; ++i) s.z[i] = static_cast<int>(sample_categorical_log(log_pi, src));
  return s;
}

/// y_i ~ N(x_i beta_{z_i}, sigma_{z_i}^2).
inline Eigen::VectorXd simulate_responses(const ChainState& s, const Eigen::MatrixXd& X,
                                          RandomSource& src) {
  Eigen::VectorXd y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int j = s.z[i];
    y[i] = X.row(i).dot(s.beta.row(j)) + std::sqrt(s.sigma2[j]) * sample_normal(src);
  }
  return y;
}

// ---------------------------------------------------------------------------
// Sweep and chain driver

inline int occupied_components(const ChainState& s) {
  int occupied = 0;
  for (int c : component_counts(s)) occupied += c > 0 ? 1 : 0;
  return occupied;
}

/// Robbins-Monro update of a log-scale step toward the target acceptance.
inline void adapt_step(double& step, bool accepted, int iteration) {
  constexpr double kTarget = 0.35;
  const double gain = std::pow(static_cast<double>(iteration), -0.6);
  step = std::clamp(step * std::exp(gain * ((accepted ? 1.0 : 0.0) - kTarget)), 1e-4, 10.0);
}

/// One sweep in the fixed order z, sticks, alpha, beta, tau, sigma^2, c, w, lambdas.
/// `adapt` tunes `scales` in place.
inline SweepDiagnostics sweep(ChainState& s, const Dataset& data, const Hyperparameters& hyper,
                              MhScales& scales, RandomSource& src, int iteration, bool adapt,
                              const SamplerOptions& opts = {}) {
  SweepDiagnostics diag;
  diag.iteration = iteration;
  if (opts.update_z) update_z(s, data, src);
  if (opts.update_sticks) update_sticks(s, src);
  if (opts.update_alpha) update_alpha(s, hyper, src);
  const auto stats = ComponentStats::compute(s, data);
  if (opts.update_beta) update_beta(s, stats, src);
  if (opts.update_tau) update_tau(s, src);
  if (opts.update_sigma2) {
    std::vector<bool> outcome;
    const auto acc = update_sigma2(s, stats, hyper, scales.sigma2, src, opts.sigma2_coef_prior,
                                   &outcome);
    diag.accept_sigma2 = acc.rate();
    if (adapt)
      for (int j = 0; j < s.J(); ++j) adapt_step(scales.sigma2[j], outcome[j], iteration);
  }
  if (opts.update_c) update_c(s, src);
  if (opts.update_w) update_w(s, src);
  if (opts.update_lambdas) {
    const auto acc = update_lambdas(s, hyper, scales, src);
    diag.accept_lambda1 = acc.lambda1.rate();
    diag.accept_lambda2 = acc.lambda2.rate();
    if (adapt)
      for (int k = 0; k < s.K(); ++k) {
        adapt_step(scales.lambda1[k], acc.last1[k], iteration);
        adapt_step(scales.lambda2[k], acc.last2[k], iteration);
      }
  }
  diag.loglik = mixture_loglik(s, data);
  diag.occupied_components = occupied_components(s);
  return diag;
}

/// Raised when a sweep diverges; carries the iteration and the last valid state.
class ChainCollapseError : public NumericalCollapseError {
 public:
  ChainCollapseError(const std::string& what, int iteration, ChainState last_good)
      : NumericalCollapseError(what), iteration_(iteration), last_good_(std::move(last_good)) {}
  int iteration() const noexcept { return iteration_; }
  const ChainState& last_good_state() const noexcept { return last_good_; }

 private:
  int iteration_;
  ChainState last_good_;
};

struct ChainOptions {
  std::uint64_t stream = 0;
  std::function<void(const SweepDiagnostics&)> observer;
  SamplerOptions sampler;
};

/// init_state followed by n_iter sweeps; keeps every thin-th post-burn-in state.
inline PosteriorChain run_chain(const Dataset& data, const Hyperparameters& hyper,
                                std::uint64_t seed, const ChainOptions& opts = {}) {
  data.validate();
  hyper.validate();
  if (!data.fit_ready())
    throw ParameterDomainError("probability responses must be logit-transformed before fitting");
  RandomSource src(seed, opts.stream);
  ChainState state = init_state(data, hyper, src);
  MhScales scales = MhScales::from(hyper);
  PosteriorChain chain;
  chain.hyper = hyper;
  chain.seed = seed;
  chain.class_id = data.class_id;
  chain.draws.reserve(static_cast<std::size_t>(hyper.retained_draws()));
  const int n = static_cast<int>(data.n()), p = static_cast<int>(data.p());
  for (int it = 1; it <= hyper.n_iter; ++it) {
    ChainState previous = state;
    SweepDiagnostics diag;
    try {
      diag = sweep(state, data, hyper, scales, src, it, hyper.adapt && it <= hyper.burn_in,
                   opts.sampler);
      if (!std::isfinite(diag.loglik))
        throw NumericalCollapseError("mixture log-likelihood is not finite");
      check_state(state, n, p, hyper.J, hyper.K);
    } catch (const NumericalCollapseError& e) {
      throw ChainCollapseError("iteration " + std::to_string(it) + ": " + e.what(), it,
                               std::move(previous));
    } catch (const NonPositiveDefiniteError& e) {
      throw ChainCollapseError("iteration " + std::to_string(it) + ": " + e.what(), it,
                               std::move(previous));
    }
    if (opts.observer) opts.observer(diag);
    if (it > hyper.burn_in && (it - hyper.burn_in) % hyper.thin == 0) {
      chain.draws.push_back(state);
      chain.loglik.push_back(diag.loglik);
    }
  }
  return chain;
}

}  // namespace dpenet::sampler

#endif  // DPENET_SAMPLER_HPP_
