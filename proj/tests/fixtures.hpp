// Hand-built states and datasets for the unit tests.
#pragma once

#include "dpenet/model.hpp"
#include "support.hpp"

namespace fixture {

/// Every field valid, nothing drawn.
inline dpenet::ChainState toy_state(int J, int K, int p, int n) {
  dpenet::ChainState s;
  s.u = Eigen::VectorXd::Constant(J - 1, 0.5);
  s.pi = dpenet::stick_breaking(s.u);
  s.alpha = 1.0;
  s.beta = Eigen::MatrixXd::Zero(J, p);
  s.sigma2 = Eigen::VectorXd::Ones(J);
  s.tau = Eigen::MatrixXd::Constant(J, p, 0.5);
  s.z.assign(n, 0);
  s.c.assign(J, 0);
  s.w = Eigen::VectorXd::Constant(K, 1.0 / K);
  s.lambda1 = Eigen::VectorXd::Ones(K);
  s.lambda2 = Eigen::VectorXd::Ones(K);
  return s;
}

/// y = sum of features + noise.
inline dpenet::Dataset toy_data(int n, int p, std::uint64_t seed, double noise = 0.3) {
  oracle::Generator gen(seed);
  dpenet::Dataset d;
  d.X = gen.normal_matrix(n, p);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) d.y[i] = d.X.row(i).sum() + noise * gen.normal();
  return d;
}

}  // namespace fixture
