#include "lmt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace lmt::analysis {

Contribution contribution_share(double elasticity, double tightness_growth_pct,
                                double wage_growth_pct) {
  if (wage_growth_pct == 0.0 || !std::isfinite(wage_growth_pct))
    throw ValidationError("contribution_share: wage growth must be nonzero");
  Contribution c;
  c.wage_effect_pct = elasticity * tightness_growth_pct;
  c.share_pct = 100.0 * c.wage_effect_pct / wage_growth_pct;
  return c;
}

double wage_setting_level(double elasticity, double w0, double theta0, double gva,
                          double workforce, double days) {
  if (!(w0 > 0.0 && theta0 > 0.0 && gva > 0.0 && workforce > 0.0 && days > 0.0))
    throw ValidationError("wage_setting_level: inputs must be positive");
  const double productivity = gva / (workforce * days);
  return elasticity * (w0 / theta0) / productivity;
}

DecileCounterfactual decile_counterfactual(std::span<const double> observed,
                                           std::span<const double> elasticity,
                                           std::span<const double> growth) {
  if (observed.size() != elasticity.size() || observed.size() != growth.size())
    throw ValidationError("decile_counterfactual: inputs differ in length");
  if (observed.empty()) throw ValidationError("decile_counterfactual: no deciles");
  DecileCounterfactual d;
  d.counterfactual.resize(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i)
    d.counterfactual[i] = observed[i] - elasticity[i] * growth[i];
  d.gap_observed = observed.back() - observed.front();
  d.gap_counterfactual = d.counterfactual.back() - d.counterfactual.front();
  d.gap_change = d.gap_observed - d.gap_counterfactual;
  return d;
}

std::vector<double> partial_worker_effects(std::span<const double> y,
                                           const std::vector<estimator::FactorCodes>& dims,
                                           double tol, std::size_t max_sweeps) {
  if (dims.empty()) throw ValidationError("partial_worker_effects: no dimensions");
  const std::size_t n = y.size();
  for (const auto& d : dims)
    if (d.codes.size() != n) throw ValidationError("partial_worker_effects: codes do not match rows");
  std::vector<std::vector<double>> effect(dims.size());
  std::vector<std::vector<double>> count(dims.size());
  for (std::size_t d = 0; d < dims.size(); ++d) {
    effect[d].assign(dims[d].groups, 0.0);
    count[d].assign(dims[d].groups, 0.0);
    for (auto c : dims[d].codes) count[d][c] += 1.0;
  }
  std::vector<double> fitted(n, 0.0);
  std::vector<double> sum;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (std::size_t d = 0; d < dims.size(); ++d) {
      const auto& codes = dims[d].codes;
      sum.assign(dims[d].groups, 0.0);
      for (std::size_t i = 0; i < n; ++i) sum[codes[i]] += y[i] - fitted[i] + effect[d][codes[i]];
      for (std::size_t g = 0; g < sum.size(); ++g) {
        const double next = count[d][g] > 0.0 ? sum[g] / count[d][g] : 0.0;
        change = std::max(change, std::abs(next - effect[d][g]));
        sum[g] = next - effect[d][g];
        effect[d][g] = next;
      }
      for (std::size_t i = 0; i < n; ++i) fitted[i] += sum[codes[i]];
    }
    if (change < tol) {
      std::vector<double> out(n);
      for (std::size_t i = 0; i < n; ++i) out[i] = effect[0][dims[0].codes[i]];
      return out;
    }
  }
  throw EstimationError("partial_worker_effects: no convergence");
}

std::vector<FirmYearOutcome> firm_average_outcome(std::span<const std::string> firm,
                                                  std::span<const int> year,
                                                  std::span<const double> log_wage,
                                                  std::span<const double> worker_effect) {
  const std::size_t n = firm.size();
  if (year.size() != n || log_wage.size() != n || worker_effect.size() != n)
    throw ValidationError("firm_average_outcome: inputs differ in length");
  std::map<std::pair<std::string, int>, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = acc[{firm[i], year[i]}];
    a.first += log_wage[i] - worker_effect[i];
    ++a.second;
  }
  std::vector<FirmYearOutcome> out;
  out.reserve(acc.size());
  for (const auto& [key, a] : acc)
    out.push_back({key.first, key.second, a.first / static_cast<double>(a.second), a.second});
  return out;
}

Binscatter binscatter(std::span<const double> x_in, std::span<const double> y_in,
                      std::size_t n_bins, const PartialOut* partial) {
  const std::size_t n = x_in.size();
  if (y_in.size() != n) throw ValidationError("binscatter: x and y differ in length");
  if (n_bins < 2) throw ValidationError("binscatter: need at least 2 bins");
  if (n == 0) throw ValidationError("binscatter: no observations");
  std::vector<double> x(x_in.begin(), x_in.end()), y(y_in.begin(), y_in.end());

  if (partial) {
    const auto k = partial->controls.cols();
    if (k > 0 && partial->controls.rows() != static_cast<Eigen::Index>(n))
      throw ValidationError("binscatter: controls do not match rows");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), 2 + k);
    for (std::size_t i = 0; i < n; ++i) {
      m(static_cast<Eigen::Index>(i), 0) = x[i];
      m(static_cast<Eigen::Index>(i), 1) = y[i];
    }
    if (k > 0) m.rightCols(k) = partial->controls;
    if (!partial->dims.empty()) {
      estimator::demean(m, partial->dims, partial->weights);
    } else {
      m.rowwise() -= m.colwise().mean();
    }
    if (k > 0) {
      const Eigen::MatrixXd c = m.rightCols(k);
      const auto qr = c.colPivHouseholderQr();
      const Eigen::MatrixXd coef = qr.solve(m.leftCols(2));
      m.leftCols(2) -= c * coef;
    }
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = m(static_cast<Eigen::Index>(i), 0) + mx;
      y[i] = m(static_cast<Eigen::Index>(i), 1) + my;
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  std::vector<std::size_t> bin_of(n);
  for (std::size_t k = 0; k < n; ++k) {
    bin_of[k] = k * n_bins / n;
    if (k > 0 && x[order[k]] == x[order[k - 1]]) bin_of[k] = bin_of[k - 1];
  }
  Binscatter out;
  for (std::size_t k = 0; k < n;) {
    Bin b;
    b.bin = bin_of[k];
    double sx = 0.0, sy = 0.0;
    std::size_t j = k;
    for (; j < n && bin_of[j] == b.bin; ++j) {
      sx += x[order[j]];
      sy += y[order[j]];
    }
    b.n = j - k;
    b.mean_x = sx / static_cast<double>(b.n);
    b.mean_y = sy / static_cast<double>(b.n);
    out.bins.push_back(b);
    k = j;
  }
  for (std::size_t i = 0; i < out.bins.size(); ++i) out.bins[i].bin = i + 1;
  if (out.bins.size() < n_bins)
    out.warnings.push_back("only " + std::to_string(out.bins.size()) + " of " +
                           std::to_string(n_bins) + " bins are nonempty; tied x values collapse bins");
  return out;
}

csv::Table binscatter_to_table(const Binscatter& b) {
  csv::Table t;
  t.header = {"bin", "n", "mean_x", "mean_y"};
  for (const auto& bin : b.bins)
    t.rows.push_back({std::to_string(bin.bin), std::to_string(bin.n), csv::format_double(bin.mean_x),
                      csv::format_double(bin.mean_y)});
  return t;
}

}  // namespace lmt::analysis
