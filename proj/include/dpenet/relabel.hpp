#ifndef DPENET_RELABEL_HPP_
#define DPENET_RELABEL_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpenet/log.hpp"
#include "dpenet/model.hpp"

namespace dpenet {

/// Minimum-cost perfect matching of rows to columns (Hungarian method,
/// O(n^3) with potentials). Returns column[row].
inline std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw ShapeError("assignment cost must be square");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int row = 1; row <= n; ++row) {
    match[0] = row;
    int col0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const int r = match[col0];
      double delta = kInf;
      int col1 = 0;
      for (int col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double cur = cost(r - 1, col - 1) - u[r] - v[col];
        if (cur < minv[col]) {
          minv[col] = cur;
          way[col] = col0;
        }
        if (minv[col] < delta) {
          delta = minv[col];
          col1 = col;
        }
      }
      for (int col = 0; col <= n; ++col) {
        if (used[col]) {
          u[match[col]] += delta;
          v[col] -= delta;
        } else {
          minv[col] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const int col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> assignment(n);
  for (int col = 1; col <= n; ++col) assignment[match[col] - 1] = col - 1;
  return assignment;
}

/// Repeatedly takes the globally cheapest remaining (row, column) pair.
inline std::vector<int> greedy_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<std::pair<double, std::pair<int, int>>> cells;
  cells.reserve(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) cells.push_back({cost(r, c), {r, c}});
  std::sort(cells.begin(), cells.end());
  std::vector<int> assignment(n, -1);
  std::vector<char> taken(n, 0);
  int left = n;
  for (const auto& [value, rc] : cells) {
    if (left == 0) break;
    if (assignment[rc.first] >= 0 || taken[rc.second]) continue;
    assignment[rc.first] = rc.second;
    taken[rc.second] = 1;
    --left;
  }
  return assignment;
}

/// New label j takes old component perm[j]. z and c follow; u is rebuilt from
/// the permuted weights.
inline ChainState permute_state(const ChainState& s, const std::vector<int>& perm) {
  const int J = s.J();
  ChainState out = s;
  std::vector<int> inverse(J);
  for (int j = 0; j < J; ++j) {
    const int old = perm[j];
    inverse[old] = j;
    out.pi[j] = s.pi[old];
    out.beta.row(j) = s.beta.row(old);
    out.sigma2[j] = s.sigma2[old];
    out.tau.row(j) = s.tau.row(old);
    out.c[j] = s.c[old];
  }
  for (int& zi : out.z) zi = inverse[zi];
  out.u = sticks_from_weights(out.pi);
  return out;
}

inline bool is_identity(const std::vector<int>& perm) {
  for (int j = 0; j < static_cast<int>(perm.size()); ++j)
    if (perm[j] != j) return false;
  return true;
}

struct Relabeling {
  std::vector<std::vector<int>> permutations;  // per draw, new label -> old label
  Eigen::MatrixXd reference;                   // J x p coefficient target
  Eigen::VectorXd reference_sigma2;
  Eigen::VectorXd reference_share;  // mean occupancy share per aligned label
  std::vector<double> cost_trace;  // per-draw alignment cost at the final reference
  int iterations = 0;
  bool converged = true;
};

struct RelabelOptions {
  int max_iterations = 100;
  /// Hungarian up to this J, greedy beyond.
  int exact_limit = 64;
  /// p x p PSD matrix measuring coefficient distances; empty means identity.
  /// Passing X'X/n compares components by their fitted values.
  Eigen::MatrixXd metric;
};

/// Share of samples assigned to each component.
inline Eigen::VectorXd occupancy_share(const ChainState& s) {
  Eigen::VectorXd share = Eigen::VectorXd::Zero(s.J());
  for (int zi : s.z) share[zi] += 1.0;
  return s.z.empty() ? share : Eigen::VectorXd(share / static_cast<double>(s.z.size()));
}

/// Iterative relabeling: align every draw to a reference by optimal
/// assignment on
///
///   sum_j (w_perm(j) + wref_j + eps) * (|beta_perm(j) - ref_j|^2 + (sigma2_perm(j) - ref_sigma2_j)^2)
///
/// where w are occupancy shares and eps = 1/J^2, then move the reference to
/// the cost-weighted mean of the aligned draws, until no permutation changes.
/// With a metric M the coefficient term is (b - r)' M (b - r). The weights
/// keep empty components (prior draws, often far from everything) from
/// steering the alignment of occupied ones. The first reference is the
/// highest-likelihood draw (or the draw mean when the chain is already
/// relabeled).
inline std::pair<PosteriorChain, Relabeling> relabel_chain(const PosteriorChain& chain,
                                                           const RelabelOptions& opts = {}) {
  PosteriorChain out = chain;
  Relabeling info;
  const auto D = chain.draws.size();
  if (D == 0) {
    out.relabeled = true;
    return {out, info};
  }
  const int J = chain.draws.front().J();
  const Eigen::Index p = chain.draws.front().beta.cols();
  const double eps = 1.0 / (static_cast<double>(J) * J);
  std::vector<int> identity(J);
  std::iota(identity.begin(), identity.end(), 0);
  std::vector<Eigen::VectorXd> shares(D);
  for (std::size_t d = 0; d < D; ++d) shares[d] = occupancy_share(chain.draws[d]);

  // Coefficients in the metric's coordinates: M = W'W, distances are |W b|.
  std::vector<Eigen::MatrixXd> mapped;
  if (opts.metric.size() > 0) {
    if (opts.metric.rows() != p || opts.metric.cols() != p)
      throw std::invalid_argument("relabel metric must be p x p");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (opts.metric + opts.metric.transpose()));
    const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
    const double floor = 1e-12 * std::max(lam.maxCoeff(), 0.0);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < p; ++k)
      if (lam[k] > floor) keep.push_back(k);
    Eigen::MatrixXd Wt(p, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k)
      Wt.col(static_cast<Eigen::Index>(k)) = eig.eigenvectors().col(keep[k]) * std::sqrt(lam[keep[k]]);
    mapped.resize(D);
    for (std::size_t d = 0; d < D; ++d) mapped[d] = chain.draws[d].beta * Wt;
  }
  auto coef = [&](std::size_t d) -> const Eigen::MatrixXd& {
    return mapped.empty() ? chain.draws[d].beta : mapped[d];
  };

  // Reference coefficients and variances are averaged with the cost weights
  // of the previous reference (plain means on the first pass); shares are
  // always plain means.
  auto mean_of = [&](const std::vector<std::vector<int>>& perms,
                     const Eigen::VectorXd* weight_share, bool original = false) {
    const Eigen::Index q = original ? p : coef(0).cols();
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(J, q);
    Eigen::VectorXd sigma2 = Eigen::VectorXd::Zero(J), share = Eigen::VectorXd::Zero(J),
                    total = Eigen::VectorXd::Zero(J);
    for (std::size_t d = 0; d < D; ++d)
      for (int j = 0; j < J; ++j) {
        const int m = perms[d][j];
        const double w = weight_share ? shares[d][m] + (*weight_share)[j] + eps : 1.0;
        beta.row(j) += w * (original ? chain.draws[d].beta : coef(d)).row(m);
        sigma2[j] += w * chain.draws[d].sigma2[m];
        total[j] += w;
        share[j] += shares[d][m];
      }
    for (int j = 0; j < J; ++j) {
      beta.row(j) /= total[j];
      sigma2[j] /= total[j];
    }
    share /= static_cast<double>(D);
    return std::make_tuple(beta, sigma2, share);
  };

  std::vector<std::vector<int>> perms(D, identity);
  Eigen::MatrixXd ref;
  Eigen::VectorXd ref_sigma2, ref_share;
  if (chain.relabeled || chain.loglik.size() != D) {
    std::tie(ref, ref_sigma2, ref_share) = mean_of(perms, nullptr);
  } else {
    const auto best = static_cast<std::size_t>(
        std::max_element(chain.loglik.begin(), chain.loglik.end()) - chain.loglik.begin());
    ref = coef(best);
    ref_sigma2 = chain.draws[best].sigma2;
    ref_share = shares[best];
  }

  auto cost_matrix = [&](std::size_t d) {
    const auto& s = chain.draws[d];
    Eigen::MatrixXd cost(J, J);
    for (int j = 0; j < J; ++j)
      for (int m = 0; m < J; ++m) {
        const double ds = s.sigma2[m] - ref_sigma2[j];
        cost(j, m) = (shares[d][m] + ref_share[j] + eps) *
                     ((coef(d).row(m) - ref.row(j)).squaredNorm() + ds * ds);
      }
    return cost;
  };

  info.converged = false;
  Eigen::VectorXd last_share = ref_share;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    info.iterations = it;
    bool changed = false;
    for (std::size_t d = 0; d < D; ++d) {
      const Eigen::MatrixXd cost = cost_matrix(d);
      auto perm = J <= opts.exact_limit ? solve_assignment(cost) : greedy_assignment(cost);
      if (perm != perms[d]) {
        changed = true;
        perms[d] = std::move(perm);
      }
    }
    last_share = ref_share;
    std::tie(ref, ref_sigma2, ref_share) = mean_of(perms, &last_share);
    if (!changed) {
      info.converged = true;
      break;
    }
  }
  if (!info.converged)
    log::warn("relabeling did not converge after " + std::to_string(opts.max_iterations) +
              " iterations; keeping the last labeling");

  info.cost_trace.resize(D);
  for (std::size_t d = 0; d < D; ++d) {
    if (!is_identity(perms[d])) out.draws[d] = permute_state(chain.draws[d], perms[d]);
    const Eigen::MatrixXd cost = cost_matrix(d);
    double total = 0.0;
    for (int j = 0; j < J; ++j) total += cost(j, perms[d][j]);
    info.cost_trace[d] = total;
  }
  info.reference = mapped.empty() ? std::move(ref)
                                  : std::get<0>(mean_of(perms, &last_share, true));
  info.permutations = std::move(perms);
  info.reference_sigma2 = std::move(ref_sigma2);
  info.reference_share = std::move(ref_share);
  out.relabeled = true;
  return {out, info};
}

}  // namespace dpenet

#endif  // DPENET_RELABEL_HPP_
