#include "lmt/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "lmt/parallel.hpp"

namespace lmt::imputation {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Continued fraction for phi(a) / (1 - Phi(a)) when a is large.
double hazard_continued_fraction(double a) {
  double tail = a;
  for (int k = 60; k >= 1; --k) tail = a + k / tail;
  return tail;
}

}  // namespace

double upper_hazard(double a) {
  if (a > 8.0) return hazard_continued_fraction(a);
  const double q = 0.5 * std::erfc(a / std::numbers::sqrt2);
  const double phi = std::exp(-0.5 * a * a - kLogSqrt2Pi);
  return phi / q;
}

double log_upper_tail(double a) {
  if (a > 8.0) return -0.5 * a * a - kLogSqrt2Pi - std::log(hazard_continued_fraction(a));
  return std::log(0.5 * std::erfc(a / std::numbers::sqrt2));
}

double upper_tail_mean(double mean, double sigma, double limit) {
  if (!(sigma > 0.0)) throw ValidationError("upper_tail_mean needs sigma > 0");
  return mean + sigma * upper_hazard((limit - mean) / sigma);
}

double tobit_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                    const Eigen::VectorXd& limit, const std::vector<char>& censored,
                    const Eigen::VectorXd& beta, double sigma) {
  if (!(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd xb = x * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (censored[static_cast<std::size_t>(i)]) {
      ll += log_upper_tail((limit[i] - xb[i]) / sigma);
    } else {
      const double r = (y[i] - xb[i]) / sigma;
      ll += -0.5 * r * r - kLogSqrt2Pi - std::log(sigma);
    }
  }
  return ll;
}

namespace {

struct Olsen {
  double ll = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

// Log-likelihood, gradient and Hessian in gamma = beta / sigma, tau = 1 / sigma.
Olsen olsen_eval(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Eigen::VectorXd& limit,
                 const std::vector<char>& censored, const Eigen::VectorXd& p, bool derivatives) {
  const Eigen::Index k = x.cols();
  const Eigen::VectorXd gamma = p.head(k);
  const double tau = p[k];
  Olsen out;
  if (!(tau > 0.0)) {
    out.ll = -std::numeric_limits<double>::infinity();
    return out;
  }
  const Eigen::VectorXd xg = x * gamma;
  if (derivatives) {
    out.grad = Eigen::VectorXd::Zero(k + 1);
    out.hess = Eigen::MatrixXd::Zero(k + 1, k + 1);
  }
  const double log_tau = std::log(tau);
  Eigen::VectorXd d(k + 1);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const auto xi = x.row(i).transpose();
    if (censored[static_cast<std::size_t>(i)]) {
      const double s = tau * limit[i] - xg[i];
      out.ll += log_upper_tail(s);
      if (!derivatives) continue;
      const double lam = upper_hazard(s);
      const double curv = lam * (lam - s);
      // ds/dgamma = -x, ds/dtau = limit
      d.head(k) = -xi;
      d[k] = limit[i];
      out.grad -= lam * d;
      out.hess.noalias() -= curv * d * d.transpose();
    } else {
      const double r = tau * y[i] - xg[i];
      out.ll += log_tau - kLogSqrt2Pi - 0.5 * r * r;
      if (!derivatives) continue;
      d.head(k) = -xi;
      d[k] = y[i];
      out.grad -= r * d;
      out.hess.noalias() -= d * d.transpose();
      out.grad[k] += 1.0 / tau;
      out.hess(k, k) -= 1.0 / (tau * tau);
    }
  }
  return out;
}

TobitFit finish(const Eigen::VectorXd& p, const Olsen& at, Eigen::Index k, std::size_t n,
                std::size_t n_cens, double start_ll, std::size_t iterations) {
  TobitFit f;
  const double tau = p[k];
  f.beta = p.head(k) / tau;
  f.sigma = 1.0 / tau;
  f.loglik = at.ll;
  f.start_loglik = start_ll;
  f.iterations = iterations;
  f.gradient_norm = at.grad.size() ? at.grad.cwiseAbs().maxCoeff() / static_cast<double>(n) : 0.0;
  f.n = n;
  f.n_censored = n_cens;
  f.se_beta = Eigen::VectorXd::Constant(k, kNaN);
  f.se_sigma = kNaN;
  if (at.hess.size()) {
    const Eigen::MatrixXd info = -at.hess;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(k + 1, k + 1));
      // delta method: beta = gamma / tau, sigma = 1 / tau
      Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(k + 1, k + 1);
      jac.topLeftCorner(k, k) = Eigen::MatrixXd::Identity(k, k) / tau;
      jac.block(0, k, k, 1) = -p.head(k) / (tau * tau);
      jac(k, k) = -1.0 / (tau * tau);
      const Eigen::MatrixXd v = jac * cov * jac.transpose();
      for (Eigen::Index j = 0; j < k; ++j) f.se_beta[j] = std::sqrt(std::max(v(j, j), 0.0));
      f.se_sigma = std::sqrt(std::max(v(k, k), 0.0));
    }
  }
  return f;
}

}  // namespace

TobitFit fit_tobit(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Eigen::VectorXd& limit,
                   const std::vector<char>& censored, const TobitOptions& options) {
  const Eigen::Index n = y.size();
  const Eigen::Index k = x.cols();
  if (x.rows() != n || limit.size() != n || censored.size() != static_cast<std::size_t>(n))
    throw ValidationError("tobit: inputs differ in length");
  std::vector<Eigen::Index> unc;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!censored[static_cast<std::size_t>(i)]) unc.push_back(i);
  if (unc.empty()) throw EstimationError("tobit: no uncensored observations");
  const auto nu = static_cast<Eigen::Index>(unc.size());
  if (nu <= k) throw EstimationError("tobit: fewer uncensored observations than regressors");

  Eigen::MatrixXd xu(nu, k);
  Eigen::VectorXd yu(nu);
  for (Eigen::Index r = 0; r < nu; ++r) {
    xu.row(r) = x.row(unc[static_cast<std::size_t>(r)]);
    yu[r] = y[unc[static_cast<std::size_t>(r)]];
  }
  const auto qr = xu.colPivHouseholderQr();
  if (qr.rank() < k) throw EstimationError("tobit: regressors are collinear on the uncensored rows");
  const Eigen::VectorXd b0 = qr.solve(yu);
  const double s0 = std::sqrt((yu - xu * b0).squaredNorm() / static_cast<double>(nu));
  if (!(s0 > 0.0)) throw EstimationError("tobit: uncensored rows are fitted exactly");

  Eigen::VectorXd p(k + 1);
  p.head(k) = b0 / s0;
  p[k] = 1.0 / s0;
  const std::size_t n_cens = static_cast<std::size_t>(n - nu);
  Olsen cur = olsen_eval(y, x, limit, censored, p, true);
  const double start_ll = cur.ll;
  const double scale = static_cast<double>(n);

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    if (cur.grad.cwiseAbs().maxCoeff() / scale < options.gradient_tol)
      return finish(p, cur, k, static_cast<std::size_t>(n), n_cens, start_ll, it);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-cur.hess);
    Eigen::VectorXd step = ldlt.solve(cur.grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) step = cur.grad / scale;
    // predicted gain of the full step is below rounding in ll
    if (std::abs(cur.grad.dot(step)) < 1e-13 * (1.0 + std::abs(cur.ll)))
      return finish(p, cur, k, static_cast<std::size_t>(n), n_cens, start_ll, it);
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h < 60; ++h, t *= 0.5) {
      Eigen::VectorXd cand = p + t * step;
      if (!(cand[k] > 0.0)) continue;
      const double ll = olsen_eval(y, x, limit, censored, cand, false).ll;
      if (ll >= cur.ll) {
        p = cand;
        moved = true;
        break;
      }
    }
    cur = olsen_eval(y, x, limit, censored, p, true);
    if (!moved) {
      if (cur.grad.cwiseAbs().maxCoeff() / scale < 1e3 * options.gradient_tol)
        return finish(p, cur, k, static_cast<std::size_t>(n), n_cens, start_ll, it + 1);
      break;
    }
  }
  if (cur.grad.cwiseAbs().maxCoeff() / scale < options.gradient_tol)
    return finish(p, cur, k, static_cast<std::size_t>(n), n_cens, start_ll, options.max_iterations);
  auto best = finish(p, cur, k, static_cast<std::size_t>(n), n_cens, start_ll,
                     options.max_iterations);
  throw TobitConvergenceError("tobit: no convergence; mean gradient " +
                                  std::to_string(best.gradient_norm),
                              std::move(best));
}

std::string_view to_string(ImputeStatus s) {
  switch (s) {
    case ImputeStatus::observed: return "observed";
    case ImputeStatus::imputed: return "imputed";
    case ImputeStatus::failed: return "failed";
  }
  return "?";
}

namespace {

struct Design {
  Eigen::MatrixXd x;
  std::vector<std::string> names;
};

// Keeps the intercept plus every candidate column that varies on the
// uncensored rows and is not spanned by the columns kept before it.
Design select_columns(const Eigen::MatrixXd& cand, const std::vector<std::string>& names,
                      const std::vector<char>& censored) {
  std::vector<Eigen::Index> unc;
  for (Eigen::Index i = 0; i < cand.rows(); ++i)
    if (!censored[static_cast<std::size_t>(i)]) unc.push_back(i);
  std::vector<Eigen::VectorXd> basis;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < cand.cols(); ++j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(unc.size()));
    for (std::size_t r = 0; r < unc.size(); ++r) v[static_cast<Eigen::Index>(r)] = cand(unc[r], j);
    const double n0 = v.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) v -= q.dot(v) * q;
    if (!(n0 > 0.0) || v.norm() <= 1e-8 * n0) continue;
    basis.push_back(v / v.norm());
    keep.push_back(j);
  }
  Design d;
  d.x.resize(cand.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    d.x.col(static_cast<Eigen::Index>(c)) = cand.col(keep[c]);
    d.names.push_back(names[static_cast<std::size_t>(keep[c])]);
  }
  return d;
}

}  // namespace

ImputeResult impute(const std::vector<WorkerSpell>& spells, const ImputeOptions& options) {
  const std::size_t n = spells.size();
  ImputeResult out;
  out.spells = spells;
  out.status.assign(n, ImputeStatus::observed);

  std::vector<double> logw(n), loglim(n);
  std::vector<char> cens(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = spells[i];
    if (!(s.wage_nominal > 0.0)) throw ValidationError("impute: wage must be positive");
    logw[i] = std::log(s.wage_nominal);
    auto lim = options.censor_limits.find(s.year);
    loglim[i] = lim != options.censor_limits.end() ? std::log(lim->second) : logw[i];
    cens[i] = s.censored ? 1 : 0;
  }

  std::map<CellKey, std::vector<std::size_t>> cell_rows;
  for (std::size_t i = 0; i < n; ++i)
    cell_rows[{spells[i].year, spells[i].gender, spells[i].education}].push_back(i);
  std::vector<CellKey> keys;
  for (const auto& [k, v] : cell_rows) keys.push_back(k);
  out.cells.resize(keys.size());

  const std::vector<std::string> base_names = {"intercept", "age",   "age_sq", "req_2",
                                               "req_3",     "req_4", "east"};
  auto base_row = [&](std::size_t i, auto&& r) {
    const auto& s = spells[i];
    const int req = s.requirement();
    r[0] = 1.0;
    r[1] = s.age;
    r[2] = s.age * s.age / 100.0;
    r[3] = req == 2;
    r[4] = req == 3;
    r[5] = req == 4;
    r[6] = s.east;
  };

  // step 1
  std::vector<double> completed = logw;
  std::vector<double> cell_mean(keys.size(), 0.0);
  parallel_for(keys.size(), options.threads, [&](std::size_t c) {
    const auto& rows = cell_rows.at(keys[c]);
    auto& rep = out.cells[c];
    rep.key = keys[c];
    rep.n = rows.size();
    const auto m = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd cand(m, static_cast<Eigen::Index>(base_names.size()));
    Eigen::VectorXd y(m), lim(m);
    std::vector<char> cc(rows.size());
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto i = rows[static_cast<std::size_t>(r)];
      base_row(i, cand.row(r));
      y[r] = logw[i];
      lim[r] = loglim[i];
      cc[static_cast<std::size_t>(r)] = cens[i];
      rep.n_censored += cens[i];
    }
    try {
      auto design = select_columns(cand, base_names, cc);
      rep.step1 = fit_tobit(y, design.x, lim, cc, options.tobit);
      const Eigen::VectorXd xb = design.x * rep.step1.beta;
      for (Eigen::Index r = 0; r < m; ++r)
        if (cc[static_cast<std::size_t>(r)])
          completed[rows[static_cast<std::size_t>(r)]] =
              upper_tail_mean(xb[r], rep.step1.sigma, lim[r]);
      rep.ok = true;
    } catch (const Error& e) {
      rep.ok = false;
      rep.message = std::string("step 1: ") + e.what();
    }
    double sum = 0.0;
    for (auto i : rows) sum += completed[i];
    cell_mean[c] = sum / static_cast<double>(rows.size());
  });

  // leave-one-out firm-year means of completed step-1 log wages
  std::map<std::pair<std::string, int>, std::pair<double, std::size_t>> firm_sum;
  for (std::size_t i = 0; i < n; ++i) {
    auto& fs = firm_sum[{spells[i].firm_id, spells[i].year}];
    fs.first += completed[i];
    ++fs.second;
  }
  std::vector<double> loo(n);
  for (std::size_t c = 0; c < keys.size(); ++c)
    for (auto i : cell_rows.at(keys[c])) {
      const auto& fs = firm_sum.at({spells[i].firm_id, spells[i].year});
      loo[i] = fs.second > 1 ? (fs.first - completed[i]) / static_cast<double>(fs.second - 1)
                             : cell_mean[c];
    }

  // step 2
  std::vector<std::string> names2 = base_names;
  names2.push_back("firm_loo_mean");
  std::vector<double> imputed_log(n, kNaN);
  parallel_for(keys.size(), options.threads, [&](std::size_t c) {
    auto& rep = out.cells[c];
    if (!rep.ok) return;
    const auto& rows = cell_rows.at(keys[c]);
    const auto m = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd cand(m, static_cast<Eigen::Index>(names2.size()));
    Eigen::VectorXd y(m), lim(m);
    std::vector<char> cc(rows.size());
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto i = rows[static_cast<std::size_t>(r)];
      base_row(i, cand.row(r).head(static_cast<Eigen::Index>(base_names.size())));
      cand(r, static_cast<Eigen::Index>(base_names.size())) = loo[i];
      y[r] = logw[i];
      lim[r] = loglim[i];
      cc[static_cast<std::size_t>(r)] = cens[i];
    }
    try {
      auto design = select_columns(cand, names2, cc);
      rep.regressors = design.names;
      rep.step2 = fit_tobit(y, design.x, lim, cc, options.tobit);
      const Eigen::VectorXd xb = design.x * rep.step2.beta;
      for (Eigen::Index r = 0; r < m; ++r)
        if (cc[static_cast<std::size_t>(r)])
          imputed_log[rows[static_cast<std::size_t>(r)]] =
              upper_tail_mean(xb[r], rep.step2.sigma, lim[r]);
    } catch (const Error& e) {
      rep.ok = false;
      rep.message = std::string("step 2: ") + e.what();
    }
  });

  for (std::size_t i = 0; i < n; ++i) {
    if (!cens[i]) continue;
    if (std::isfinite(imputed_log[i])) {
      out.spells[i].wage_nominal = std::exp(imputed_log[i]);
      out.status[i] = ImputeStatus::imputed;
      ++out.imputed;
    } else {
      out.status[i] = ImputeStatus::failed;
      ++out.failed;
    }
  }
  return out;
}

csv::Table result_to_table(const ImputeResult& r) {
  auto t = spells_to_table(r.spells);
  t.header.push_back("imputation");
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    t.rows[i].emplace_back(to_string(r.status[i]));
  return t;
}

}  // namespace lmt::imputation
