#ifndef DPENET_EXPLAIN_HPP_
#define DPENET_EXPLAIN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "dpenet/distributions.hpp"
#include "dpenet/error.hpp"
#include "dpenet/model.hpp"
#include "dpenet/relabel.hpp"
#include "dpenet/sampler.hpp"

namespace dpenet {

/// Posterior summaries of a fitted mixture, in raw feature units.
struct SurrogateModel {
  PosteriorChain chain;      // pooled, relabeled, standardized feature space
  Eigen::MatrixXd beta_mean;  // J x p, raw units
  Eigen::VectorXd intercept;  // J, raw units (zero unless features were centered)
  Eigen::VectorXd sigma2_mean;
  Eigen::VectorXd pi_mean;
  Eigen::VectorXd occupancy;  // mean number of samples per component
  Standardization standardization;
  std::string class_id;
  std::vector<std::string> feature_names;
  int n_train = 0;

  int J() const { return static_cast<int>(pi_mean.size()); }
  int p() const { return static_cast<int>(beta_mean.cols()); }

  std::string feature_name(int l) const {
    if (static_cast<std::size_t>(l) < feature_names.size()) return feature_names[l];
    return "x" + std::to_string(l);
  }

  /// Fills the summary fields from `chain` and `standardization`.
  void summarize() {
    const auto& draws = chain.draws;
    if (draws.empty()) throw EmptyModelError("cannot summarize a chain with no draws");
    const int J = draws.front().J();
    const Eigen::Index p = draws.front().beta.cols();
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(J, p);
    sigma2_mean = Eigen::VectorXd::Zero(J);
    pi_mean = Eigen::VectorXd::Zero(J);
    occupancy = Eigen::VectorXd::Zero(J);
    for (const auto& s : draws) {
      beta += s.beta;
      sigma2_mean += s.sigma2;
      pi_mean += s.pi;
      for (int zi : s.z) occupancy[zi] += 1.0;
    }
    const auto D = static_cast<double>(draws.size());
    beta /= D;
    sigma2_mean /= D;
    pi_mean /= D;
    occupancy /= D;
    n_train = draws.front().n();
    beta_mean.resize(J, p);
    intercept.resize(J);
    for (int j = 0; j < J; ++j) {
      const Eigen::VectorXd row = beta.row(j).transpose();
      beta_mean.row(j) = standardization.coefficient_to_raw(row).transpose();
      intercept[j] = standardization.intercept_to_raw(row);
    }
  }
};

struct FitOptions {
  int n_chains = 1;
  /// Center features and response in addition to scaling.
  bool center = false;
  /// Run chains on separate threads.
  bool parallel = true;
  std::function<void(int chain, const sampler::SweepDiagnostics&)> observer;
  sampler::SamplerOptions sampler;
};

struct FitResult {
  SurrogateModel model;
  std::vector<PosteriorChain> chains;  // per chain, before relabeling
};

/// Standardize, run the chains, relabel the pooled draws, summarize.
inline FitResult fit_surrogate(const Dataset& data, const Hyperparameters& hyper,
                               std::uint64_t seed, const FitOptions& opts = {}) {
  data.validate();
  hyper.validate();
  if (!data.fit_ready())
    throw ParameterDomainError("probability responses must be logit-transformed before fitting");
  if (opts.n_chains < 1) throw ConfigError("n_chains must be >= 1");
  FitResult result;
  result.model.standardization = Standardization::fit(data, opts.center);
  const Dataset prepared = result.model.standardization.apply(data);

  const auto n_chains = static_cast<std::size_t>(opts.n_chains);
  result.chains.resize(n_chains);
  std::vector<std::exception_ptr> errors(n_chains);
  auto run = [&](std::size_t c) {
    try {
      sampler::ChainOptions co;
      co.stream = c;
      co.sampler = opts.sampler;
      if (opts.observer)
        co.observer = [&, c](const sampler::SweepDiagnostics& d) {
          opts.observer(static_cast<int>(c), d);
        };
      result.chains[c] = sampler::run_chain(prepared, hyper, seed, co);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (opts.parallel && n_chains > 1) {
    std::vector<std::jthread> workers;
    for (std::size_t c = 0; c < n_chains; ++c) workers.emplace_back(run, c);
  } else {
    for (std::size_t c = 0; c < n_chains; ++c) run(c);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  PosteriorChain pooled;
  pooled.hyper = hyper;
  pooled.seed = seed;
  pooled.class_id = data.class_id;
  for (const auto& ch : result.chains) {
    pooled.draws.insert(pooled.draws.end(), ch.draws.begin(), ch.draws.end());
    pooled.loglik.insert(pooled.loglik.end(), ch.loglik.begin(), ch.loglik.end());
  }
  // Align components by their fitted values so directions the data cannot
  // resolve (collinear columns) do not split one component across labels.
  RelabelOptions ro;
  const Eigen::Index p = prepared.X.cols();
  ro.metric = Eigen::MatrixXd::Zero(p, p);
  ro.metric.selfadjointView<Eigen::Lower>().rankUpdate(prepared.X.transpose(),
                                                       1.0 / static_cast<double>(prepared.X.rows()));
  ro.metric = ro.metric.selfadjointView<Eigen::Lower>();
  result.model.chain = relabel_chain(pooled, ro).first;
  result.model.class_id = data.class_id;
  result.model.feature_names = data.feature_names;
  result.model.summarize();
  return result;
}

// ---------------------------------------------------------------------------
// Prediction

inline void check_length(const SurrogateModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.p())
    throw ShapeError("sample has " + std::to_string(x.size()) + " features, model expects " +
                     std::to_string(model.p()));
}

/// Linear prediction of component j.
inline double predict_component(const SurrogateModel& model, const Eigen::VectorXd& x, int j) {
  check_length(model, x);
  return model.intercept[j] + model.beta_mean.row(j).dot(x);
}

/// Posterior-mean mixture mean sum_j pi_j (b_j + x . beta_j).
inline double predict(const SurrogateModel& model, const Eigen::VectorXd& x) {
  check_length(model, x);
  return model.pi_mean.dot(model.intercept + model.beta_mean * x);
}

enum class AssignmentMode { posterior_mean, per_draw_vote };

struct ComponentAssignment {
  int component = 0;
  double confidence = 1.0;       // normalized weight of `component`
  std::vector<double> weights;   // normalized over all J
};

/// Most probable component for x: argmax_j pi_j N(r | b_j + x beta_j, sigma_j^2),
/// where r is the observed response when given and the mixture-mean
/// prediction otherwise.
inline ComponentAssignment assign_component(const SurrogateModel& model, const Eigen::VectorXd& x,
                                            std::optional<double> response = std::nullopt,
                                            AssignmentMode mode = AssignmentMode::posterior_mean) {
  check_length(model, x);
  const int J = model.J();
  const double r = response ? *response : predict(model, x);
  ComponentAssignment out;
  if (mode == AssignmentMode::posterior_mean) {
    std::vector<double> lw(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j)
      lw[j] = std::log(model.pi_mean[j]) +
              log_normal_pdf(r, predict_component(model, x, j), model.sigma2_mean[j]);
    out.weights = softmax(lw);
  } else {
    if (model.chain.draws.empty()) throw EmptyModelError("per-draw voting needs chain draws");
    const auto& st = model.standardization;
    const Eigen::VectorXd xs = ((x - st.mean).array() / st.scale.array()).matrix();
    const double rs = r - st.response_offset;
    out.weights.assign(static_cast<std::size_t>(J), 0.0);
    std::vector<double> lw(static_cast<std::size_t>(J));
    for (const auto& s : model.chain.draws) {
      for (int j = 0; j < J; ++j)
        lw[j] = std::log(s.pi[j]) + log_normal_pdf(rs, s.beta.row(j).dot(xs), s.sigma2[j]);
      out.weights[static_cast<std::size_t>(std::max_element(lw.begin(), lw.end()) - lw.begin())] +=
          1.0;
    }
    for (double& v : out.weights) v /= static_cast<double>(model.chain.draws.size());
  }
  out.component = static_cast<int>(std::max_element(out.weights.begin(), out.weights.end()) -
                                   out.weights.begin());
  out.confidence = out.weights[out.component];
  return out;
}

/// Prediction of the single component the sample is assigned to.
inline double predict_assigned(const SurrogateModel& model, const Eigen::VectorXd& x,
                               std::optional<double> response = std::nullopt) {
  return predict_component(model, x, assign_component(model, x, response).component);
}

/// sqrt(sum (g - g_hat)^2 / n).
inline double rmse(const Eigen::VectorXd& g, const Eigen::VectorXd& g_hat) {
  if (g.size() != g_hat.size()) throw ShapeError("rmse inputs differ in length");
  if (g.size() == 0) return 0.0;
  return std::sqrt((g - g_hat).squaredNorm() / static_cast<double>(g.size()));
}

/// Surrogate approximation error on a dataset: each sample is predicted by
/// the component its observed response is assigned to.
inline double rmse(const SurrogateModel& model, const Dataset& data) {
  if (data.p() != model.p()) throw ShapeError("dataset feature count does not match model");
  Eigen::VectorXd fitted(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i)
    fitted[i] = predict_assigned(model, data.X.row(i).transpose(), data.y[i]);
  return rmse(data.y, fitted);
}

// ---------------------------------------------------------------------------
// Local explanations

struct RankedFeature {
  int index = 0;
  std::string name;
  double weight = 0.0;
};

struct Explanation {
  std::optional<std::size_t> sample_index;
  int component = 0;
  double assignment_confidence = 1.0;
  std::vector<RankedFeature> ranked_features;
  bool truncated = false;
};

enum class Importance {
  coefficient,   // |beta_l| over features present in x
  contribution,  // |beta_l * x_l|
};

struct ExplainOptions {
  std::optional<double> response;
  std::optional<std::size_t> sample_index;
  Importance importance = Importance::coefficient;
  AssignmentMode mode = AssignmentMode::posterior_mean;
};

/// Indices ordered by |score| descending, ties by lower index.
inline std::vector<int> rank_by_magnitude(const Eigen::VectorXd& score,
                                          const std::vector<int>& candidates) {
  std::vector<int> order = candidates;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(score[a]), mb = std::abs(score[b]);
    return ma != mb ? ma > mb : a < b;
  });
  return order;
}

inline Explanation local_explanation(const SurrogateModel& model, const Eigen::VectorXd& x,
                                     int top_k, const ExplainOptions& opts = {}) {
  if (top_k < 1) throw ParameterDomainError("top_k must be positive");
  if (!x.allFinite()) throw ParameterDomainError("sample has non-finite features");
  const auto assignment = assign_component(model, x, opts.response, opts.mode);
  Explanation out;
  out.sample_index = opts.sample_index;
  out.component = assignment.component;
  out.assignment_confidence = assignment.confidence;
  Eigen::VectorXd weight = model.beta_mean.row(out.component).transpose();
  if (opts.importance == Importance::contribution) weight = weight.cwiseProduct(x);
  std::vector<int> present;
  for (int l = 0; l < model.p(); ++l)
    if (x[l] != 0.0) present.push_back(l);
  const auto order = rank_by_magnitude(weight, present);
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(top_k), order.size());
  out.truncated = keep < static_cast<std::size_t>(top_k);
  for (std::size_t r = 0; r < keep; ++r)
    out.ranked_features.push_back({order[r], model.feature_name(order[r]), weight[order[r]]});
  return out;
}

// ---------------------------------------------------------------------------
// Global patterns

struct Pattern {
  int component = 0;
  Eigen::VectorXd weights;  // raw-unit posterior-mean coefficients
  std::vector<int> support;  // top_k indices, strongest first
  Eigen::VectorXd energy;    // |weights| / max |weights|, zeros for a zero row
  double weight = 0.0;       // posterior-mean mixture weight
  double occupancy = 0.0;
};

inline Pattern make_pattern(int component, const Eigen::VectorXd& weights, int top_k) {
  if (top_k < 1) throw ParameterDomainError("top_k must be positive");
  Pattern pat;
  pat.component = component;
  pat.weights = weights;
  const double top = weights.cwiseAbs().maxCoeff();
  pat.energy = top > 0.0 ? Eigen::VectorXd(weights.cwiseAbs() / top)
                         : Eigen::VectorXd::Zero(weights.size());
  std::vector<int> all(static_cast<std::size_t>(weights.size()));
  std::iota(all.begin(), all.end(), 0);
  auto order = rank_by_magnitude(weights, all);
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(top_k)));
  pat.support = std::move(order);
  return pat;
}

/// One pattern per component holding at least `occupancy_floor` of the
/// training samples, in descending mixture-weight order.
inline std::vector<Pattern> global_patterns(const SurrogateModel& model, int top_k,
                                            double occupancy_floor = 0.01) {
  const double floor = occupancy_floor * model.n_train;
  std::vector<int> comps;
  for (int j = 0; j < model.J(); ++j)
    if (model.occupancy[j] >= floor && model.occupancy[j] > 0.0) comps.push_back(j);
  if (comps.empty()) throw EmptyModelError("no component meets the occupancy floor");
  std::stable_sort(comps.begin(), comps.end(),
                   [&](int a, int b) { return model.pi_mean[a] > model.pi_mean[b]; });
  std::vector<Pattern> out;
  for (int j : comps) {
    auto pat = make_pattern(j, model.beta_mean.row(j).transpose(), top_k);
    pat.weight = model.pi_mean[j];
    pat.occupancy = model.occupancy[j];
    out.push_back(std::move(pat));
  }
  return out;
}

/// Cosine similarity of energy maps; 0 when either is all zero.
inline double pattern_similarity(const Pattern& a, const Pattern& b) {
  if (a.energy.size() != b.energy.size())
    throw ShapeError("patterns have different feature counts");
  const double na = a.energy.norm(), nb = b.energy.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.energy.dot(b.energy) / (na * nb), -1.0, 1.0);
}

/// Copy of `base` with every coordinate whose energy reaches the threshold
/// replaced by an independent uniform draw in [lo, hi].
inline Eigen::VectorXd craft_pathological(const Pattern& pattern, const Eigen::VectorXd& base,
                                          double energy_threshold, double lo, double hi,
                                          RandomSource& src) {
  if (pattern.energy.size() != base.size())
    throw ShapeError("pattern and base sample have different feature counts");
  // Thresholds above the peak energy are legal and select nothing.
  if (!(energy_threshold > 0.0)) throw ParameterDomainError("energy threshold must be positive");
  if (!(lo < hi)) throw ParameterDomainError("value range needs lo < hi");
  std::vector<Eigen::Index> mask;
  for (Eigen::Index l = 0; l < base.size(); ++l)
    if (pattern.energy[l] >= energy_threshold) mask.push_back(l);
  if (mask.empty()) throw EmptyMaskError("no feature reaches the energy threshold");
  Eigen::VectorXd out = base;
  for (auto l : mask) out[l] = sample_uniform(lo, hi, src);
  return out;
}

/// Row-major reshape of the energy map.
inline Eigen::MatrixXd export_heatmap(const Pattern& pattern, int rows, int cols) {
  if (rows < 1 || cols < 1 || static_cast<Eigen::Index>(rows) * cols != pattern.energy.size())
    throw ShapeError("heat-map shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " does not hold " + std::to_string(pattern.energy.size()) + " features");
  Eigen::MatrixXd out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out(r, c) = pattern.energy[r * cols + c];
  return out;
}

}  // namespace dpenet

#endif  // DPENET_EXPLAIN_HPP_
