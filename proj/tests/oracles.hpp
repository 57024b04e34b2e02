#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They favour the textbook formula over speed.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Indicator columns: every level of the first dimension, all but the first
// level of the others.
inline Eigen::MatrixXd dummies(const std::vector<std::vector<int>>& dims, std::size_t n) {
  std::vector<Eigen::VectorXd> cols;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    std::map<int, std::size_t> level;
    for (int v : dims[d]) level.emplace(v, 0);
    std::size_t k = 0;
    for (auto& [v, idx] : level) idx = k++;
    for (std::size_t l = d == 0 ? 0 : 1; l < level.size(); ++l) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i)
        if (level.at(dims[d][i]) == l) c[static_cast<Eigen::Index>(i)] = 1.0;
      cols.push_back(std::move(c));
    }
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = cols[j];
  return m;
}

inline Eigen::MatrixXd hcat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd m(a.rows(), a.cols() + b.cols());
  m << a, b;
  return m;
}

// Minimum-norm least squares; the rank is returned through `rank`.
inline Eigen::VectorXd lstsq(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             Eigen::Index* rank = nullptr) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
  cod.setThreshold(1e-10);
  if (rank) *rank = cod.rank();
  return cod.solve(y);
}

// Cluster sandwich c * B * (sum_g s_g s_g') * B with s_g = X_g' e_g and
// c = G/(G-1) * (N-1)/(N-K).
inline Eigen::MatrixXd cr1(const Eigen::MatrixXd& x, const Eigen::VectorXd& e,
                           const std::vector<int>& cluster, const Eigen::MatrixXd& bread,
                           double k) {
  std::map<int, Eigen::VectorXd> score;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto [it, fresh] = score.try_emplace(cluster[static_cast<std::size_t>(i)],
                                         Eigen::VectorXd::Zero(x.cols()));
    it->second += x.row(i).transpose() * e[i];
  }
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  for (const auto& [g, s] : score) meat += s * s.transpose();
  const double G = static_cast<double>(score.size());
  const double N = static_cast<double>(x.rows());
  const double c = G / (G - 1.0) * (N - 1.0) / (N - k);
  return c * bread * meat * bread;
}

struct IvOracle {
  Eigen::VectorXd beta;
  Eigen::MatrixXd vcov;
};

// Closed-form 2SLS (X'Pz X)^-1 X'Pz y on full-rank X and Z, CR1 on the
// fitted regressors.
inline IvOracle tsls(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                     const std::vector<int>& cluster, double k) {
  const Eigen::MatrixXd ztz_inv = (z.transpose() * z).inverse();
  const Eigen::MatrixXd pzx = z * (ztz_inv * (z.transpose() * x));
  const Eigen::MatrixXd a = x.transpose() * pzx;
  IvOracle r;
  r.beta = a.inverse() * (pzx.transpose() * y);
  const Eigen::VectorXd e = y - x * r.beta;
  const Eigen::MatrixXd bread = (pzx.transpose() * pzx).inverse();
  r.vcov = cr1(pzx, e, cluster, bread, k);
  return r;
}

// Newman modularity straight from the definition with an explicit
// adjacency matrix: Q = (1/2m) sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j),
// A_ii = 2 flow(i,i) so that self-loops count once in m.
inline double modularity(const std::vector<std::vector<double>>& flow,
                         const std::vector<std::size_t>& c) {
  const std::size_t n = flow.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a[i][j] = i == j ? 2.0 * flow[i][i] : flow[i][j] + flow[j][i];
  std::vector<double> deg(n, 0.0);
  double two_m = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      deg[i] += a[i][j];
      two_m += a[i][j];
    }
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (c[i] == c[j]) q += a[i][j] - deg[i] * deg[j] / two_m;
  return q / two_m;
}

// Calls f on every set partition of {0..n-1} as a restricted growth string.
inline void for_each_partition(std::size_t n,
                               const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> a(n, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t blocks) {
    if (i == n) {
      f(a);
      return;
    }
    for (std::size_t b = 0; b <= blocks; ++b) {
      a[i] = b;
      rec(i + 1, std::max(blocks, b + 1));
    }
  };
  if (n == 0) return;
  a[0] = 0;
  rec(1, 1);
}

// Right-censored normal log-likelihood from erfc, without any tail
// expansion; fine for moderate standardized limits.
inline double tobit_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& limit, const std::vector<char>& censored,
                           const Eigen::VectorXd& beta, double sigma) {
  const double pi = 3.14159265358979323846;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double m = x.row(i).dot(beta);
    if (censored[static_cast<std::size_t>(i)]) {
      ll += std::log(0.5 * std::erfc((limit[i] - m) / (sigma * std::sqrt(2.0))));
    } else {
      const double r = (y[i] - m) / sigma;
      ll += -0.5 * r * r - std::log(sigma) - 0.5 * std::log(2.0 * pi);
    }
  }
  return ll;
}

// Compass search: evaluates the 3^d neighbourhood of the incumbent, moves to
// the best point, halves the step when nothing improves.
inline Eigen::VectorXd grid_maximize(const std::function<double(const Eigen::VectorXd&)>& f,
                                     Eigen::VectorXd p, double step, double min_step) {
  const Eigen::Index d = p.size();
  double best = f(p);
  std::size_t points = 1;
  for (Eigen::Index j = 0; j < d; ++j) points *= 3;
  while (step > min_step) {
    Eigen::VectorXd arg = p;
    double arg_v = best;
    for (std::size_t code = 0; code < points; ++code) {
      Eigen::VectorXd q = p;
      std::size_t c = code;
      for (Eigen::Index j = 0; j < d; ++j, c /= 3)
        q[j] += (static_cast<double>(c % 3) - 1.0) * step;
      const double v = f(q);
      if (v > arg_v) {
        arg_v = v;
        arg = q;
      }
    }
    if (arg_v > best) {
      best = arg_v;
      p = arg;
    } else {
      step *= 0.5;
    }
  }
  return p;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

}  // namespace oracle
