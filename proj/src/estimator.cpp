#include "lmt/estimator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>

#include "lmt/instruments.hpp"
#include "lmt/parallel.hpp"

namespace lmt::estimator {

namespace {

constexpr std::uint32_t kMissingCode = std::numeric_limits<std::uint32_t>::max();

}  // namespace

// ---------------------------------------------------------------------------
// Frame

Frame Frame::from_table(const csv::Table& t) {
  Frame f;
  f.rows_ = t.size();
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    std::vector<std::string> col(t.size());
    for (std::size_t r = 0; r < t.size(); ++r)
      if (c < t.rows[r].size()) col[r] = t.rows[r][c];
    f.set(t.header[c], std::move(col));
  }
  return f;
}

csv::Table Frame::to_table() const {
  csv::Table t;
  t.header = order_;
  std::vector<std::vector<std::string>> cols;
  for (const auto& name : order_) cols.push_back(text(name));
  t.rows.assign(rows_, std::vector<std::string>(order_.size()));
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < order_.size(); ++c) t.rows[r][c] = std::move(cols[c][r]);
  return t;
}

const Frame::Column& Frame::column(const std::string& name) const {
  auto it = columns_.find(name);
  if (it == columns_.end()) throw ValidationError("panel has no column '" + name + "'");
  return it->second;
}

bool Frame::is_numeric(const std::string& name) const {
  return std::holds_alternative<std::vector<double>>(column(name));
}

std::vector<double> Frame::numeric(const std::string& name) const {
  const auto& c = column(name);
  if (auto* d = std::get_if<std::vector<double>>(&c)) return *d;
  const auto& s = std::get<std::vector<std::string>>(c);
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = csv::parse_double(s[i]).value_or(kNaN);
  return out;
}

std::vector<std::string> Frame::text(const std::string& name) const {
  const auto& c = column(name);
  if (auto* s = std::get_if<std::vector<std::string>>(&c)) return *s;
  const auto& d = std::get<std::vector<double>>(c);
  std::vector<std::string> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = csv::format_double(d[i]);
  return out;
}

void Frame::check_length(std::size_t n) {
  if (columns_.empty()) {
    rows_ = n;
    return;
  }
  if (n != rows_) throw ValidationError("column length does not match panel rows");
}

void Frame::set(const std::string& name, std::vector<double> values) {
  check_length(values.size());
  if (!columns_.count(name)) order_.push_back(name);
  columns_[name] = std::move(values);
}

void Frame::set(const std::string& name, std::vector<std::string> values) {
  check_length(values.size());
  if (!columns_.count(name)) order_.push_back(name);
  columns_[name] = std::move(values);
}

// ---------------------------------------------------------------------------
// Factors

namespace {

std::vector<std::uint32_t> codes_of_column(const Frame& frame, const std::string& name,
                                           std::uint32_t& groups) {
  std::vector<std::uint32_t> codes(frame.rows(), kMissingCode);
  if (frame.is_numeric(name)) {
    auto v = frame.numeric(name);
    std::unordered_map<std::uint64_t, std::uint32_t> map;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) continue;
      const double key = v[i] == 0.0 ? 0.0 : v[i];
      auto [it, ins] = map.emplace(std::bit_cast<std::uint64_t>(key),
                                   static_cast<std::uint32_t>(map.size()));
      codes[i] = it->second;
    }
    groups = static_cast<std::uint32_t>(map.size());
  } else {
    auto s = frame.text(name);
    std::unordered_map<std::string, std::uint32_t> map;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (csv::is_missing(s[i])) continue;
      auto [it, ins] = map.emplace(s[i], static_cast<std::uint32_t>(map.size()));
      codes[i] = it->second;
    }
    groups = static_cast<std::uint32_t>(map.size());
  }
  return codes;
}

}  // namespace

FactorCodes encode_factor(const Frame& frame, const std::string& dimension) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = dimension.find('#', start);
    parts.push_back(dimension.substr(start, pos == std::string::npos ? std::string::npos
                                                                    : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  FactorCodes f;
  f.name = dimension;
  f.codes = codes_of_column(frame, parts[0], f.groups);
  for (std::size_t p = 1; p < parts.size(); ++p) {
    std::uint32_t g2 = 0;
    auto c2 = codes_of_column(frame, parts[p], g2);
    std::unordered_map<std::uint64_t, std::uint32_t> map;
    for (std::size_t i = 0; i < f.codes.size(); ++i) {
      if (f.codes[i] == kMissingCode || c2[i] == kMissingCode) {
        f.codes[i] = kMissingCode;
        continue;
      }
      const std::uint64_t key = static_cast<std::uint64_t>(f.codes[i]) * g2 + c2[i];
      auto [it, ins] = map.emplace(key, static_cast<std::uint32_t>(map.size()));
      f.codes[i] = it->second;
    }
    f.groups = static_cast<std::uint32_t>(map.size());
  }
  return f;
}

FactorCodes encode_codes(std::string name, std::span<const std::int64_t> raw) {
  FactorCodes f;
  f.name = std::move(name);
  f.codes.resize(raw.size());
  std::unordered_map<std::int64_t, std::uint32_t> map;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto [it, ins] = map.emplace(raw[i], static_cast<std::uint32_t>(map.size()));
    f.codes[i] = it->second;
  }
  f.groups = static_cast<std::uint32_t>(map.size());
  return f;
}

FactorCodes subset(const FactorCodes& f, std::span<const std::size_t> rows) {
  FactorCodes out;
  out.name = f.name;
  out.codes.resize(rows.size());
  std::vector<std::uint32_t> relabel(f.groups, kMissingCode);
  std::uint32_t next = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto c = f.codes[rows[k]];
    if (c == kMissingCode) throw ValidationError("factor '" + f.name + "' has missing values");
    if (relabel[c] == kMissingCode) relabel[c] = next++;
    out.codes[k] = relabel[c];
  }
  out.groups = next;
  return out;
}

SingletonResult drop_singletons(const std::vector<FactorCodes>& dims) {
  if (dims.empty()) throw ValidationError("drop_singletons needs at least one dimension");
  const std::size_t n = dims[0].codes.size();
  std::vector<char> alive(n, 1);
  SingletonResult r;
  while (true) {
    bool changed = false;
    for (const auto& d : dims) {
      std::vector<std::uint32_t> count(d.groups, 0);
      for (std::size_t i = 0; i < n; ++i)
        if (alive[i]) ++count[d.codes[i]];
      for (std::size_t i = 0; i < n; ++i)
        if (alive[i] && count[d.codes[i]] == 1) {
          alive[i] = 0;
          ++r.dropped;
          changed = true;
        }
    }
    if (!changed) break;
    ++r.rounds;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) r.kept.push_back(i);
  if (r.kept.empty()) throw EstimationError("no identifying variation");
  return r;
}

DemeanMethod parse_demean_method(std::string_view s) {
  if (s == "cg") return DemeanMethod::cg;
  if (s == "map") return DemeanMethod::map;
  throw ValidationError("unknown demean method '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Demeaning

namespace {

class Projector {
 public:
  Projector(const FactorCodes& f, std::span<const double> w) : codes_(f.codes) {
    inv_weight_.assign(f.groups, 0.0);
    for (std::size_t i = 0; i < codes_.size(); ++i) inv_weight_[codes_[i]] += w.empty() ? 1.0 : w[i];
    for (auto& v : inv_weight_) v = v > 0.0 ? 1.0 / v : 0.0;
  }

  // x <- x - (weighted group mean of x)
  void residualize(Eigen::Ref<Eigen::VectorXd> x, std::span<const double> w,
                   std::vector<double>& scratch) const {
    scratch.assign(inv_weight_.size(), 0.0);
    const std::size_t n = codes_.size();
    if (w.empty()) {
      for (std::size_t i = 0; i < n; ++i) scratch[codes_[i]] += x[i];
    } else {
      for (std::size_t i = 0; i < n; ++i) scratch[codes_[i]] += w[i] * x[i];
    }
    for (std::size_t g = 0; g < scratch.size(); ++g) scratch[g] *= inv_weight_[g];
    for (std::size_t i = 0; i < n; ++i) x[i] -= scratch[codes_[i]];
  }

 private:
  const std::vector<std::uint32_t>& codes_;
  std::vector<double> inv_weight_;
};

double wdot(const Eigen::VectorXd& a, const Eigen::VectorXd& b, std::span<const double> w) {
  if (w.empty()) return a.dot(b);
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += w[i] * a[i] * b[i];
  return s;
}

// Forward then backward sweep; self-adjoint in the weighted inner product.
void symmetric_sweep(Eigen::VectorXd& x, const std::vector<Projector>& proj,
                     std::span<const double> w, std::vector<double>& scratch) {
  const std::size_t d = proj.size();
  for (std::size_t k = 0; k < d; ++k) proj[k].residualize(x, w, scratch);
  for (std::size_t k = d - 1; k-- > 0;) proj[k].residualize(x, w, scratch);
}

// Conjugate gradients on (I - S) v = (I - S) x with S the symmetric sweep;
// the solution in the span of the dummies is the projection of x onto it.
std::pair<std::size_t, double> demean_cg(Eigen::Ref<Eigen::VectorXd> col,
                                         const std::vector<Projector>& proj,
                                         std::span<const double> w, const DemeanOptions& opt) {
  std::vector<double> scratch;
  Eigen::VectorXd x = col;
  Eigen::VectorXd sx = x;
  symmetric_sweep(sx, proj, w, scratch);
  Eigen::VectorXd r = x - sx;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd p = r;
  double rr = wdot(r, r, w);
  // residuals below this are rounding noise; iterating further diverges
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::sqrt(wdot(x, x, w));
  double delta = 0.0;
  std::size_t it = 0;
  if (rr > 0.0) {
    Eigen::VectorXd ap(x.size());
    bool converged = false;
    for (it = 1; it <= opt.max_iterations; ++it) {
      ap = p;
      symmetric_sweep(ap, proj, w, scratch);
      ap = p - ap;
      const double pap = wdot(p, ap, w);
      if (!(pap > 0.0)) {
        converged = true;
        break;
      }
      const double alpha = rr / pap;
      v += alpha * p;
      r -= alpha * ap;
      delta = std::abs(alpha) * p.cwiseAbs().maxCoeff();
      if (delta < opt.tol) {
        converged = true;
        break;
      }
      const double rr_new = wdot(r, r, w);
      if (std::sqrt(rr_new) <= floor) {
        converged = true;
        break;
      }
      p = r + (rr_new / rr) * p;
      rr = rr_new;
    }
    if (!converged)
      throw EstimationError("demeaning did not converge after " +
                            std::to_string(opt.max_iterations) +
                            " iterations; last delta " + std::to_string(delta));
  }
  col = x - v;
  return {it, delta};
}

std::pair<std::size_t, double> demean_map(Eigen::Ref<Eigen::VectorXd> col,
                                          const std::vector<Projector>& proj,
                                          std::span<const double> w, const DemeanOptions& opt) {
  std::vector<double> scratch;
  Eigen::VectorXd prev;
  double delta = 0.0;
  for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
    prev = col;
    for (const auto& p : proj) p.residualize(col, w, scratch);
    delta = (col - prev).cwiseAbs().maxCoeff();
    if (delta < opt.tol) return {it, delta};
    if (proj.size() == 1) return {it, delta};
  }
  throw EstimationError("demeaning did not converge after " + std::to_string(opt.max_iterations) +
                        " sweeps; last delta " + std::to_string(delta));
}

}  // namespace

DemeanReport demean(Eigen::MatrixXd& columns, const std::vector<FactorCodes>& dims,
                    std::span<const double> weights, const DemeanOptions& options) {
  DemeanReport report;
  if (dims.empty() || columns.cols() == 0) return report;
  for (const auto& d : dims)
    if (d.codes.size() != static_cast<std::size_t>(columns.rows()))
      throw ValidationError("fixed-effect codes do not match the number of rows");
  std::vector<Projector> proj;
  proj.reserve(dims.size());
  for (const auto& d : dims) proj.emplace_back(d, weights);

  std::vector<std::pair<std::size_t, double>> per_column(static_cast<std::size_t>(columns.cols()));
  parallel_for(per_column.size(), options.threads, [&](std::size_t c) {
    auto col = columns.col(static_cast<Eigen::Index>(c));
    per_column[c] = options.method == DemeanMethod::cg ? demean_cg(col, proj, weights, options)
                                                       : demean_map(col, proj, weights, options);
  });
  for (const auto& [it, delta] : per_column) {
    report.iterations = std::max(report.iterations, it);
    report.last_delta = std::max(report.last_delta, delta);
  }
  return report;
}

double absorbed_dof(const std::vector<FactorCodes>& dims, bool* approximate) {
  bool approx = false;
  double dof = 0.0;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    const auto& cur = dims[d];
    bool redundant = false;
    for (std::size_t e = 0; e < d && !redundant; ++e) {
      // cur is a coarsening of dims[e] when each e-group maps to one cur-group
      std::vector<std::uint32_t> map(dims[e].groups, kMissingCode);
      bool coarser = true;
      for (std::size_t i = 0; i < cur.codes.size() && coarser; ++i) {
        auto& m = map[dims[e].codes[i]];
        if (m == kMissingCode) m = cur.codes[i];
        else if (m != cur.codes[i]) coarser = false;
      }
      redundant = coarser;
    }
    if (redundant) continue;
    if (d == 0) {
      dof += cur.groups;
    } else if (d == 1) {
      // connected components of the bipartite graph between the first two dimensions
      const auto& a = dims[0];
      std::vector<std::uint32_t> parent(a.groups + cur.groups);
      std::iota(parent.begin(), parent.end(), 0u);
      auto find = [&](std::uint32_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
      };
      for (std::size_t i = 0; i < cur.codes.size(); ++i) {
        auto ra = find(a.codes[i]);
        auto rb = find(a.groups + cur.codes[i]);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
      std::size_t components = 0;
      for (std::uint32_t x = 0; x < parent.size(); ++x)
        if (find(x) == x) ++components;
      // every first-dimension group occurs in the data, so each component
      // holds at least one of them
      dof += static_cast<double>(cur.groups) - static_cast<double>(components);
    } else {
      dof += static_cast<double>(cur.groups) - 1.0;
      approx = true;
    }
  }
  if (approximate) *approximate = approx;
  return dof;
}

// ---------------------------------------------------------------------------
// Fits

const Coefficient& EstimationResult::coefficient(const std::string& name) const {
  for (const auto& c : coefficients)
    if (c.name == name) return c;
  throw ValidationError("result has no coefficient '" + name + "'");
}

std::string significance_stars(double p) {
  if (!std::isfinite(p)) return "";
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

namespace {

Eigen::VectorXd sqrt_weights(const std::vector<double>& w, Eigen::Index n) {
  if (w.empty()) return Eigen::VectorXd::Ones(n);
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i) s[i] = std::sqrt(w[static_cast<std::size_t>(i)]);
  return s;
}

// Names the first column of `m` that is (numerically) spanned by the
// preceding ones, using weighted Gram-Schmidt.
std::optional<std::size_t> first_collinear(const Eigen::MatrixXd& m, const Eigen::VectorXd& sw) {
  const Eigen::MatrixXd a = sw.asDiagonal() * m;
  std::vector<Eigen::VectorXd> basis;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    Eigen::VectorXd v = a.col(j);
    const double norm0 = v.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) v -= q.dot(v) * q;
    const double norm = v.norm();
    if (!(norm0 > 0.0) || norm <= 1e-9 * norm0) return static_cast<std::size_t>(j);
    basis.push_back(v / norm);
  }
  return std::nullopt;
}

// CR1 covariance for coefficients with "design" rows d_i (x_i for OLS,
// fitted x_i for 2SLS) and residuals e_i.
Eigen::MatrixXd cr1(const Eigen::MatrixXd& design, const Eigen::VectorXd& e,
                    const std::vector<double>& w, const FactorCodes& cluster,
                    const Eigen::MatrixXd& bread, double factor) {
  const Eigen::Index k = design.cols();
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(cluster.groups, k);
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    const double we = (w.empty() ? 1.0 : w[static_cast<std::size_t>(i)]) * e[i];
    scores.row(cluster.codes[static_cast<std::size_t>(i)]) += we * design.row(i);
  }
  const Eigen::MatrixXd meat = scores.transpose() * scores;
  return factor * bread * meat * bread;
}

struct Inference {
  double factor = 1.0;
  std::size_t clusters = 0;
};

Inference small_sample(std::size_t n, std::size_t k, double df_absorbed, const FactorCodes& cl) {
  Inference inf;
  inf.clusters = cl.groups;
  if (cl.codes.size() != n) throw ValidationError("cluster codes do not match sample size");
  if (cl.groups < 2) throw EstimationError("cluster-robust inference needs at least two clusters");
  const double big_k = static_cast<double>(k) + df_absorbed;
  const double nn = static_cast<double>(n);
  if (!(nn - big_k > 0.0))
    throw EstimationError("no residual degrees of freedom (N = " + std::to_string(n) +
                          ", K = " + std::to_string(big_k) + ")");
  const double g = static_cast<double>(cl.groups);
  inf.factor = g / (g - 1.0) * (nn - 1.0) / (nn - big_k);
  return inf;
}

void fill_coefficients(EstimationResult& r, const std::vector<std::string>& names,
                       const Eigen::VectorXd& beta) {
  boost::math::students_t dist(static_cast<double>(std::max<std::size_t>(r.clusters, 2) - 1));
  r.coefficients.clear();
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    Coefficient c;
    c.name = names[static_cast<std::size_t>(j)];
    c.estimate = beta[j];
    if (r.degenerate) {
      c.se = 0.0;
      c.t = kNaN;
      c.p = kNaN;
    } else {
      const double var = r.vcov(j, j);
      c.se = var > 0.0 ? std::sqrt(var) : 0.0;
      c.t = c.se > 0.0 ? c.estimate / c.se : kNaN;
      c.p = std::isfinite(c.t) ? 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(c.t)))
                               : kNaN;
    }
    c.stars = significance_stars(c.p);
    r.coefficients.push_back(std::move(c));
  }
}

bool exact_fit(const Eigen::VectorXd& y, const Eigen::VectorXd& e, const std::vector<double>& w) {
  double ssr = 0.0, tss = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[static_cast<std::size_t>(i)];
    ssr += wi * e[i] * e[i];
    tss += wi * y[i] * y[i];
  }
  return ssr <= 1e-24 * tss || tss == 0.0;
}

void check_inputs(const FitInput& in) {
  const auto n = in.y.size();
  if (in.x.rows() != n) throw ValidationError("regressor rows do not match outcome");
  if (static_cast<std::size_t>(in.x.cols()) != in.x_names.size())
    throw ValidationError("regressor names do not match columns");
  if (!in.weights.empty() && in.weights.size() != static_cast<std::size_t>(n))
    throw ValidationError("weights do not match outcome");
  if (in.x.cols() == 0) throw ValidationError("no regressors");
}

}  // namespace

EstimationResult fit_ols(const FitInput& in) {
  check_inputs(in);
  const Eigen::Index n = in.y.size();
  const Eigen::Index k = in.x.cols();
  const Eigen::VectorXd sw = sqrt_weights(in.weights, n);
  if (auto j = first_collinear(in.x, sw))
    throw EstimationError("rank deficient design: regressor '" + in.x_names[*j] +
                          "' is collinear with the others or the fixed effects");

  const Eigen::MatrixXd wx = sw.asDiagonal() * in.x;
  const Eigen::VectorXd wy = sw.asDiagonal() * in.y;
  const Eigen::VectorXd beta = wx.colPivHouseholderQr().solve(wy);
  const Eigen::VectorXd e = in.y - in.x * beta;
  const Eigen::MatrixXd bread = (wx.transpose() * wx).inverse();

  EstimationResult r;
  r.method = "ols";
  r.n = static_cast<std::size_t>(n);
  r.k_regressors = static_cast<std::size_t>(k);
  r.df_absorbed = in.df_absorbed;
  const auto inf = small_sample(r.n, r.k_regressors, in.df_absorbed, in.cluster);
  r.clusters = inf.clusters;
  r.small_sample_factor = inf.factor;
  r.degenerate = exact_fit(in.y, e, in.weights);
  r.vcov = r.degenerate ? Eigen::MatrixXd::Zero(k, k)
                        : cr1(in.x, e, in.weights, in.cluster, bread, inf.factor);
  r.residuals.assign(e.data(), e.data() + n);
  fill_coefficients(r, in.x_names, beta);
  return r;
}

EstimationResult fit_tsls(const FitInput& in, double weak_f_floor) {
  check_inputs(in);
  const Eigen::Index n = in.y.size();
  const Eigen::Index k = in.x.cols();
  const Eigen::Index l = in.z.cols();
  const auto n_endog = static_cast<Eigen::Index>(in.n_endogenous);
  const Eigen::Index n_excluded = l - (k - n_endog);
  if (in.z.rows() != n) throw ValidationError("instrument rows do not match outcome");
  if (n_endog == 0) throw ValidationError("2SLS needs at least one endogenous regressor");
  if (n_excluded < n_endog)
    throw ValidationError("2SLS needs at least as many instruments as endogenous regressors");

  const Eigen::VectorXd sw = sqrt_weights(in.weights, n);
  if (auto j = first_collinear(in.z, sw))
    throw EstimationError("first-stage rank deficiency: instrument '" + in.z_names[*j] +
                          "' is collinear with the others or the fixed effects");
  if (auto j = first_collinear(in.x, sw))
    throw EstimationError("rank deficient design: regressor '" + in.x_names[*j] +
                          "' is collinear with the others or the fixed effects");

  const Eigen::MatrixXd wz = sw.asDiagonal() * in.z;
  const Eigen::MatrixXd wx = sw.asDiagonal() * in.x;
  const Eigen::VectorXd wy = sw.asDiagonal() * in.y;
  const auto zqr = wz.colPivHouseholderQr();
  const Eigen::MatrixXd pi = zqr.solve(wx);
  const Eigen::MatrixXd xhat = in.z * pi;
  if (auto j = first_collinear(xhat, sw))
    throw EstimationError("first-stage rank deficiency: fitted '" + in.x_names[*j] +
                          "' is not identified by the instruments");

  const Eigen::MatrixXd wxhat = sw.asDiagonal() * xhat;
  const Eigen::VectorXd beta = wxhat.colPivHouseholderQr().solve(wy);
  const Eigen::VectorXd e = in.y - in.x * beta;
  const Eigen::MatrixXd bread = (wxhat.transpose() * wxhat).inverse();

  EstimationResult r;
  r.method = "2sls";
  r.n = static_cast<std::size_t>(n);
  r.k_regressors = static_cast<std::size_t>(k);
  r.df_absorbed = in.df_absorbed;
  const auto inf = small_sample(r.n, r.k_regressors, in.df_absorbed, in.cluster);
  r.clusters = inf.clusters;
  r.small_sample_factor = inf.factor;
  r.degenerate = exact_fit(in.y, e, in.weights);
  r.vcov = r.degenerate ? Eigen::MatrixXd::Zero(k, k)
                        : cr1(xhat, e, in.weights, in.cluster, bread, inf.factor);
  r.residuals.assign(e.data(), e.data() + n);
  fill_coefficients(r, in.x_names, beta);

  // First stages: each endogenous column on all instruments, CR1 Wald F of
  // the excluded ones.
  const Eigen::MatrixXd zbread = (wz.transpose() * wz).inverse();
  const auto fs_inf = small_sample(r.n, static_cast<std::size_t>(l), in.df_absorbed, in.cluster);
  boost::math::students_t dist(static_cast<double>(r.clusters - 1));
  for (Eigen::Index j = 0; j < n_endog; ++j) {
    const Eigen::VectorXd g = pi.col(j);
    const Eigen::VectorXd u = in.x.col(j) - in.z * g;
    const Eigen::MatrixXd v = cr1(in.z, u, in.weights, in.cluster, zbread, fs_inf.factor);
    FirstStage fs;
    fs.endogenous = in.x_names[static_cast<std::size_t>(j)];
    fs.df1 = static_cast<std::size_t>(n_excluded);
    const Eigen::VectorXd b = g.head(n_excluded);
    const Eigen::MatrixXd vb = v.topLeftCorner(n_excluded, n_excluded);
    for (Eigen::Index m = 0; m < n_excluded; ++m) {
      Coefficient c;
      c.name = in.z_names[static_cast<std::size_t>(m)];
      c.estimate = b[m];
      c.se = vb(m, m) > 0.0 ? std::sqrt(vb(m, m)) : 0.0;
      c.t = c.se > 0.0 ? c.estimate / c.se : kNaN;
      c.p = std::isfinite(c.t)
                ? 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(c.t)))
                : kNaN;
      c.stars = significance_stars(c.p);
      fs.excluded.push_back(std::move(c));
    }
    fs.f_stat = b.dot(vb.ldlt().solve(b)) / static_cast<double>(n_excluded);
    fs.weak = !(fs.f_stat >= weak_f_floor);
    if (fs.weak)
      r.warnings.push_back("weak first stage for '" + fs.endogenous +
                           "': F = " + std::to_string(fs.f_stat));
    r.first_stage.push_back(std::move(fs));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Pipeline

void RegressionSpec::validate() const {
  if (outcome.empty()) throw ValidationError("spec: outcome is required");
  if (instruments.size() < endogenous.size())
    throw ValidationError("spec: need at least as many instruments as endogenous regressors");
  if (!endogenous.empty() && instruments.empty())
    throw ValidationError("spec: endogenous regressors need instruments");
  if (endogenous.empty() && !instruments.empty())
    throw ValidationError("spec: instruments given without endogenous regressors");
  if (endogenous.empty() && exogenous.empty())
    throw ValidationError("spec: no regressors");
  if (cluster.empty()) throw ValidationError("spec: cluster dimension is required");
  if (trim && (trim->lower_pct < 0.0 || trim->lower_pct >= 50.0 || trim->upper_pct <= 50.0 ||
               trim->upper_pct > 100.0))
    throw ValidationError("spec: trim percentiles must satisfy 0 <= lower < 50 < upper <= 100");
  if (!(demean.tol > 0.0)) throw ValidationError("spec: demeaning tolerance must be positive");
}

namespace {

// Linear-interpolation percentile of finite values.
double percentile(std::vector<double> v, double pct) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return kNaN;
  const double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double weighted_norm(const Eigen::VectorXd& x, std::span<const double> w) {
  return std::sqrt(wdot(x, x, w));
}

}  // namespace

EstimationResult estimate(const RegressionSpec& spec, const Frame& frame) {
  spec.validate();
  const bool iv = !spec.endogenous.empty();
  const std::size_t n0 = frame.rows();

  // raw columns
  auto y_raw = frame.numeric(spec.outcome);
  std::vector<std::pair<std::string, std::vector<double>>> endog, inst, exog;
  for (const auto& c : spec.endogenous) endog.emplace_back(c, frame.numeric(c));
  for (const auto& c : spec.instruments) inst.emplace_back(c, frame.numeric(c));
  for (const auto& c : spec.exogenous) exog.emplace_back(c, frame.numeric(c));
  std::vector<double> w_raw;
  if (spec.weight) w_raw = frame.numeric(*spec.weight);
  std::vector<FactorCodes> dims_raw;
  for (const auto& d : spec.fe) dims_raw.push_back(encode_factor(frame, d));
  if (dims_raw.empty()) {
    FactorCodes cons;
    cons.name = "_cons";
    cons.codes.assign(n0, 0);
    cons.groups = n0 > 0 ? 1 : 0;
    dims_raw.push_back(std::move(cons));
  }
  if (!frame.has(spec.cluster) && spec.cluster.find('#') == std::string::npos)
    throw ValidationError("cluster dimension '" + spec.cluster + "' not present in panel");
  FactorCodes cluster_raw = encode_factor(frame, spec.cluster);
  std::vector<std::string> groups_raw;
  if (spec.interact_by) groups_raw = frame.text(*spec.interact_by);

  // complete cases
  std::vector<std::size_t> rows;
  rows.reserve(n0);
  for (std::size_t i = 0; i < n0; ++i) {
    bool ok = std::isfinite(y_raw[i]);
    for (const auto* set : {&endog, &inst, &exog})
      for (const auto& [name, v] : *set) ok = ok && std::isfinite(v[i]);
    if (!w_raw.empty()) ok = ok && std::isfinite(w_raw[i]) && w_raw[i] > 0.0;
    for (const auto& d : dims_raw) ok = ok && d.codes[i] != kMissingCode;
    ok = ok && cluster_raw.codes[i] != kMissingCode;
    if (!groups_raw.empty()) ok = ok && !csv::is_missing(groups_raw[i]);
    if (ok) rows.push_back(i);
  }
  EstimationResult result;
  result.dropped_missing = n0 - rows.size();

  // trimming of outcome and the main regressor
  if (spec.trim) {
    const auto& main = iv ? endog.front().second : exog.front().second;
    std::vector<double> ys, xs;
    for (auto i : rows) {
      ys.push_back(y_raw[i]);
      xs.push_back(main[i]);
    }
    const double ylo = percentile(ys, spec.trim->lower_pct), yhi = percentile(ys, spec.trim->upper_pct);
    const double xlo = percentile(xs, spec.trim->lower_pct), xhi = percentile(xs, spec.trim->upper_pct);
    std::vector<std::size_t> kept;
    for (auto i : rows)
      if (y_raw[i] >= ylo && y_raw[i] <= yhi && main[i] >= xlo && main[i] <= xhi) kept.push_back(i);
    result.dropped_trim = rows.size() - kept.size();
    rows = std::move(kept);
  }
  if (rows.empty()) throw EstimationError("estimation sample is empty");

  // singletons
  std::vector<FactorCodes> dims;
  for (const auto& d : dims_raw) dims.push_back(subset(d, rows));
  auto singles = drop_singletons(dims);
  result.dropped_singletons = singles.dropped;
  std::vector<std::size_t> sample(singles.kept.size());
  for (std::size_t k = 0; k < sample.size(); ++k) sample[k] = rows[singles.kept[k]];
  for (auto& d : dims) d = subset(d, singles.kept);
  const std::size_t n = sample.size();

  // assemble named columns on the sample, including derived ones
  auto take = [&](const std::vector<double>& v) {
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = v[sample[k]];
    return out;
  };
  std::vector<std::pair<std::string, std::vector<double>>> xcols, zcols;
  std::size_t n_endog = 0;
  auto add_main = [&](std::vector<std::pair<std::string, std::vector<double>>>& dst,
                      const std::string& name, std::vector<double> v) {
    if (spec.interact_by) {
      std::vector<std::string> g(n);
      for (std::size_t k = 0; k < n; ++k) g[k] = groups_raw[sample[k]];
      auto inter = instruments::interact(v, g, spec.interact_levels);
      for (auto& w : inter.warnings) result.warnings.push_back(w);
      for (std::size_t s = 0; s < inter.columns.size(); ++s)
        dst.emplace_back(name + ":" + inter.levels[s], std::move(inter.columns[s]));
    } else {
      dst.emplace_back(name, v);
    }
    if (spec.quadratic) {
      for (auto& x : v) x *= x;
      dst.emplace_back(name + "_sq", std::move(v));
    }
  };
  if (iv) {
    add_main(xcols, endog[0].first, take(endog[0].second));
    for (std::size_t j = 1; j < endog.size(); ++j) xcols.emplace_back(endog[j].first, take(endog[j].second));
    n_endog = xcols.size();
    add_main(zcols, inst[0].first, take(inst[0].second));
    for (std::size_t j = 1; j < inst.size(); ++j) zcols.emplace_back(inst[j].first, take(inst[j].second));
    for (const auto& [name, v] : exog) {
      xcols.emplace_back(name, take(v));
      zcols.emplace_back(name, take(v));
    }
  } else {
    add_main(xcols, exog[0].first, take(exog[0].second));
    for (std::size_t j = 1; j < exog.size(); ++j) xcols.emplace_back(exog[j].first, take(exog[j].second));
  }

  std::vector<double> w;
  if (!w_raw.empty()) w = take(w_raw);

  // one matrix: y | x | excluded instruments
  const std::size_t n_excl = iv ? zcols.size() - (xcols.size() - n_endog) : 0;
  const auto total = static_cast<Eigen::Index>(1 + xcols.size() + n_excl);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), total);
  {
    auto yv = take(y_raw);
    for (std::size_t k = 0; k < n; ++k) m(static_cast<Eigen::Index>(k), 0) = yv[k];
  }
  for (std::size_t j = 0; j < xcols.size(); ++j)
    for (std::size_t k = 0; k < n; ++k)
      m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(1 + j)) = xcols[j].second[k];
  for (std::size_t j = 0; j < n_excl; ++j)
    for (std::size_t k = 0; k < n; ++k)
      m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(1 + xcols.size() + j)) =
          zcols[j].second[k];

  Eigen::VectorXd norms0(total);
  for (Eigen::Index c = 0; c < total; ++c) {
    // norm after removing the weighted mean, so constants count as absorbed
    Eigen::VectorXd col = m.col(c);
    double sw = 0.0, sx = 0.0;
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      const double wi = w.empty() ? 1.0 : w[static_cast<std::size_t>(i)];
      sw += wi;
      sx += wi * col[i];
    }
    col.array() -= sx / sw;
    norms0[c] = std::max(weighted_norm(col, w), 1e-300);
  }
  auto report = demean(m, dims, w, spec.demean);
  result.demean_iterations = report.iterations;
  for (Eigen::Index c = 1; c < total; ++c) {
    if (weighted_norm(m.col(c), w) <= 1e-9 * norms0[c]) {
      const auto j = static_cast<std::size_t>(c - 1);
      const std::string& name = j < xcols.size() ? xcols[j].first : zcols[j - xcols.size()].first;
      throw EstimationError("rank deficient design: column '" + name +
                            "' is absorbed by the fixed effects");
    }
  }

  FitInput in;
  in.y = m.col(0);
  in.x = m.middleCols(1, static_cast<Eigen::Index>(xcols.size()));
  for (const auto& c : xcols) in.x_names.push_back(c.first);
  in.weights = w;
  in.cluster = subset(cluster_raw, sample);
  bool approx = false;
  in.df_absorbed = absorbed_dof(dims, &approx);
  in.n_endogenous = n_endog;

  EstimationResult fit;
  if (iv) {
    in.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(zcols.size()));
    in.z.leftCols(static_cast<Eigen::Index>(n_excl)) =
        m.rightCols(static_cast<Eigen::Index>(n_excl));
    if (xcols.size() > n_endog)
      in.z.rightCols(static_cast<Eigen::Index>(xcols.size() - n_endog)) =
          in.x.rightCols(static_cast<Eigen::Index>(xcols.size() - n_endog));
    for (const auto& c : zcols) in.z_names.push_back(c.first);
    fit = fit_tsls(in, spec.weak_f_floor);
  } else {
    fit = fit_ols(in);
  }
  fit.dof_approximate = approx;
  fit.sample_rows = std::move(sample);
  fit.dropped_missing = result.dropped_missing;
  fit.dropped_trim = result.dropped_trim;
  fit.dropped_singletons = result.dropped_singletons;
  fit.demean_iterations = result.demean_iterations;
  fit.warnings.insert(fit.warnings.begin(), result.warnings.begin(), result.warnings.end());
  return fit;
}

}  // namespace lmt::estimator
