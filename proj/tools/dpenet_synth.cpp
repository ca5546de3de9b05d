// Synthetic regression targets for trying the surrogate without a real model.
//
//   linear     y = x . b + noise
//   mixture    two linear components, picked per sample with equal odds
//   piecewise  sign of x0 selects one of two disjoint coefficient sets
//
// Writes features.csv and responses.csv. The responses file holds a raw
// score column `score` and a probability column `prob` = 1/(1+exp(-score)).

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dpenet/distributions.hpp"
#include "dpenet/io.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Synthetic data for dpenet"};
  std::string kind = "mixture";
  int n = 400;
  int p = 5;
  double noise = 0.1;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  app.add_option("--kind", kind, "linear, mixture or piecewise")
      ->check(CLI::IsMember({"linear", "mixture", "piecewise"}));
  app.add_option("--n", n, "Samples")->check(CLI::PositiveNumber);
  app.add_option("--p", p, "Features (>= 4)")->check(CLI::Range(4, 100000));
  app.add_option("--noise", noise, "Noise standard deviation")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--out-dir", out_dir, "Output directory");
  CLI11_PARSE(app, argc, argv);

  dpenet::RandomSource src(seed, 0);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2, p);
  B.row(0).head(4) << 1.5, -2.0, 0.0, 0.5;
  B.row(1).head(4) << -1.0, 0.5, 2.0, 0.0;
  if (kind == "piecewise") {
    B.setZero();
    const int half = p / 2;
    for (int l = 1; l < half; ++l) B(0, l) = (l % 2 ? 2.0 : -1.5);
    for (int l = half; l < p; ++l) B(1, l) = (l % 2 ? -2.0 : 1.5);
  }

  Eigen::MatrixXd X(n, p);
  Eigen::MatrixXd Y(n, 2);
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < p; ++l) X(i, l) = dpenet::sample_normal(src);
    int comp = 0;
    if (kind == "mixture") comp = src.uniform() < 0.5 ? 0 : 1;
    if (kind == "piecewise") comp = X(i, 0) < 0.0 ? 0 : 1;
    const double y = X.row(i).dot(B.row(comp)) + noise * dpenet::sample_normal(src);
    Y(i, 0) = y;
    Y(i, 1) = 1.0 / (1.0 + std::exp(-y));
  }

  std::vector<std::string> names;
  for (int l = 0; l < p; ++l) names.push_back("x" + std::to_string(l));
  try {
    fs::create_directories(out_dir);
    dpenet::io::write_csv(fs::path(out_dir) / "features.csv", X, names);
    dpenet::io::write_csv(fs::path(out_dir) / "responses.csv", Y, {"score", "prob"});
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
