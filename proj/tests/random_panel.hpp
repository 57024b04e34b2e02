#pragma once

// Random fixed-effects panels with an endogenous regressor, shared by the
// estimator unit tests and the acceptance run.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lmt/estimator.hpp"

namespace panels {

inline std::vector<double> as_double(const std::vector<int>& v) { return {v.begin(), v.end()}; }

struct Panel {
  lmt::estimator::Frame frame;
  std::vector<std::vector<int>> dims;
  std::vector<int> cluster;
  Eigen::VectorXd y;
  Eigen::MatrixXd x;  // x1, x2
  Eigen::VectorXd z;  // instrument for x1
};

// y = 1.5 x1 - 0.7 x2 + fixed effects + noise; x1 is endogenous.
inline Panel random_panel(std::size_t n, std::size_t n_dims, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Panel p;
  const auto m = static_cast<Eigen::Index>(n);
  p.y.resize(m);
  p.x.resize(m, 2);
  p.z.resize(m);
  const std::vector<int> levels = {40, 15, 8, 5};
  p.dims.assign(n_dims, std::vector<int>(n));
  std::vector<std::vector<double>> effect(n_dims);
  for (std::size_t d = 0; d < n_dims; ++d) {
    std::uniform_int_distribution<int> g(0, levels[d] - 1);
    for (auto& v : p.dims[d]) v = g(gen);
    effect[d].resize(static_cast<std::size_t>(levels[d]));
    for (auto& e : effect[d]) e = z(gen);
  }
  p.cluster.resize(n);
  std::uniform_int_distribution<int> cl(0, 24);
  for (auto& c : p.cluster) c = cl(gen);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    double fe = 0.0;
    for (std::size_t d = 0; d < n_dims; ++d)
      fe += effect[d][static_cast<std::size_t>(p.dims[d][ui])];
    const double u = z(gen);
    p.z[i] = z(gen) + 0.3 * fe;
    p.x(i, 0) = p.z[i] + 0.5 * u + 0.2 * fe + 0.3 * z(gen);
    p.x(i, 1) = z(gen) + 0.1 * fe;
    p.y[i] = 1.5 * p.x(i, 0) - 0.7 * p.x(i, 1) + fe + u;
  }
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  p.frame.set("y", vec(p.y));
  p.frame.set("x1", vec(p.x.col(0)));
  p.frame.set("x2", vec(p.x.col(1)));
  p.frame.set("z", vec(p.z));
  for (std::size_t d = 0; d < n_dims; ++d) p.frame.set("f" + std::to_string(d), as_double(p.dims[d]));
  p.frame.set("cl", as_double(p.cluster));
  return p;
}

}  // namespace panels
