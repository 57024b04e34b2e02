#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "lmt/estimator.hpp"
#include "oracles.hpp"
#include "random_panel.hpp"

using namespace lmt;
using namespace lmt::estimator;
using panels::as_double;
using panels::random_panel;

namespace {

RegressionSpec base_spec(std::size_t n_dims) {
  RegressionSpec s;
  s.outcome = "y";
  for (std::size_t d = 0; d < n_dims; ++d) s.fe.push_back("f" + std::to_string(d));
  s.cluster = "cl";
  s.demean.tol = 1e-14;
  return s;
}

FactorCodes codes(std::vector<std::int64_t> raw, std::string name = "f") {
  return encode_codes(std::move(name), raw);
}

}  // namespace

TEST_CASE("demeaning by one dimension subtracts group means") {
  Eigen::MatrixXd m(4, 1);
  m << 1, 2, 3, 4;
  demean(m, {codes({0, 0, 1, 1})}, {});
  CHECK(m(0, 0) == doctest::Approx(-0.5));
  CHECK(m(1, 0) == doctest::Approx(0.5));
  CHECK(m(2, 0) == doctest::Approx(-0.5));
  CHECK(m(3, 0) == doctest::Approx(0.5));
}

TEST_CASE("CG and alternating projections agree") {
  auto p = random_panel(600, 3, 1);
  std::vector<FactorCodes> dims;
  for (std::size_t d = 0; d < 3; ++d) {
    std::vector<std::int64_t> raw(p.dims[d].begin(), p.dims[d].end());
    dims.push_back(codes(raw));
  }
  Eigen::MatrixXd a = p.x, b = p.x;
  DemeanOptions cg{1e-13, 100000, DemeanMethod::cg, 2};
  DemeanOptions map{1e-13, 100000, DemeanMethod::map, 1};
  demean(a, dims, {}, cg);
  demean(b, dims, {}, map);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("singleton dropping iterates through chains") {
  // row 3 is alone in f; dropping it leaves row 2 alone in g
  auto f = codes({0, 0, 1, 2});
  auto g = codes({0, 0, 1, 1}, "g");
  auto r = drop_singletons({f, g});
  CHECK(r.kept == std::vector<std::size_t>{0, 1});
  CHECK(r.dropped == 2);
  CHECK_THROWS_AS(drop_singletons({codes({0, 1, 2})}), EstimationError);
}

TEST_CASE("factor encoding with interactions and missing values") {
  Frame f;
  f.set("a", std::vector<std::string>{"x", "y", "x", "NA"});
  f.set("b", std::vector<double>{1, 1, 2, 1});
  auto single = encode_factor(f, "a");
  CHECK(single.groups == 2);
  CHECK(single.codes[3] == std::numeric_limits<std::uint32_t>::max());
  auto both = encode_factor(f, "a#b");
  CHECK(both.groups == 3);
  CHECK(both.codes[0] != both.codes[2]);
}

TEST_CASE("absorbed degrees of freedom") {
  // two connected components in the bipartite graph of f and g
  auto f = codes({0, 0, 1, 1, 2, 2});
  auto g = codes({0, 1, 0, 1, 2, 2}, "g");
  bool approx = true;
  CHECK(absorbed_dof({f, g}, &approx) == doctest::Approx(3 + 3 - 2));
  CHECK_FALSE(approx);
  // a coarsening of f adds nothing
  auto coarse = codes({0, 0, 0, 0, 1, 1}, "c");
  CHECK(absorbed_dof({f, coarse}) == doctest::Approx(3));
  absorbed_dof({f, g, codes({0, 1, 2, 0, 1, 2}, "h")}, &approx);
  CHECK(approx);
}

TEST_CASE("fixed-effects OLS equals dummy-variable OLS") {
  for (std::size_t n_dims = 2; n_dims <= 4; ++n_dims) {
    INFO(n_dims);
    auto p = random_panel(800, n_dims, 10 + n_dims);
    auto spec = base_spec(n_dims);
    spec.exogenous = {"x1", "x2"};
    auto r = estimate(spec, p.frame);
    REQUIRE(r.dropped_singletons == 0);
    auto design = oracle::hcat(p.x, oracle::dummies(p.dims, 800));
    auto b = oracle::lstsq(design, p.y);
    CHECK(oracle::rel_diff(r.coefficient("x1").estimate, b[0]) < 1e-8);
    CHECK(oracle::rel_diff(r.coefficient("x2").estimate, b[1]) < 1e-8);
  }
}

TEST_CASE("CR1 standard errors match the sandwich with one fixed effect") {
  auto p = random_panel(500, 1, 3);
  auto spec = base_spec(1);
  spec.exogenous = {"x1", "x2"};
  auto r = estimate(spec, p.frame);
  auto design = oracle::hcat(p.x, oracle::dummies(p.dims, 500));
  Eigen::Index rank = 0;
  auto b = oracle::lstsq(design, p.y, &rank);
  const Eigen::VectorXd e = p.y - design * b;
  const Eigen::MatrixXd bread = (design.transpose() * design).inverse();
  auto v = oracle::cr1(design, e, p.cluster, bread, static_cast<double>(rank));
  CHECK(rank == 2 + 40);
  CHECK(oracle::rel_diff(r.coefficient("x1").se, std::sqrt(v(0, 0))) < 1e-10);
  CHECK(oracle::rel_diff(r.coefficient("x2").se, std::sqrt(v(1, 1))) < 1e-10);
  CHECK(oracle::rel_diff(r.vcov(0, 1), v(0, 1)) < 1e-9);
  CHECK(r.df_absorbed == 40.0);
  CHECK(r.clusters == 25);
}

TEST_CASE("2SLS with fixed effects equals the closed form on dummies") {
  auto p = random_panel(700, 1, 4);
  auto spec = base_spec(1);
  spec.endogenous = {"x1"};
  spec.instruments = {"z"};
  spec.exogenous = {"x2"};
  auto r = estimate(spec, p.frame);
  auto d = oracle::dummies(p.dims, 700);
  auto xw = oracle::hcat(p.x, d);
  Eigen::MatrixXd zx(700, 2);
  zx.col(0) = p.z;
  zx.col(1) = p.x.col(1);
  auto zw = oracle::hcat(zx, d);
  auto o = oracle::tsls(xw, zw, p.y, p.cluster, static_cast<double>(xw.cols()));
  CHECK(r.method == "2sls");
  CHECK(oracle::rel_diff(r.coefficient("x1").estimate, o.beta[0]) < 1e-10);
  CHECK(oracle::rel_diff(r.coefficient("x2").estimate, o.beta[1]) < 1e-10);
  CHECK(oracle::rel_diff(r.coefficient("x1").se, std::sqrt(o.vcov(0, 0))) < 1e-10);
  CHECK(oracle::rel_diff(r.coefficient("x2").se, std::sqrt(o.vcov(1, 1))) < 1e-10);
  REQUIRE(r.first_stage.size() == 1);
  CHECK(r.first_stage[0].f_stat > 10.0);
  CHECK_FALSE(r.first_stage[0].weak);
}

TEST_CASE("first-stage F equals the squared cluster-robust t with one instrument") {
  auto p = random_panel(400, 1, 5);
  auto spec = base_spec(1);
  spec.endogenous = {"x1"};
  spec.instruments = {"z"};
  auto r = estimate(spec, p.frame);
  const auto& c = r.first_stage[0].excluded[0];
  CHECK(r.first_stage[0].f_stat == doctest::Approx(c.t * c.t).epsilon(1e-10));
}

TEST_CASE("weighted OLS matches least squares on scaled rows") {
  auto p = random_panel(300, 1, 6);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::vector<double> w(300);
  for (auto& v : w) v = u(gen);
  p.frame.set("w", w);
  auto spec = base_spec(1);
  spec.exogenous = {"x1", "x2"};
  spec.weight = "w";
  auto r = estimate(spec, p.frame);
  auto design = oracle::hcat(p.x, oracle::dummies(p.dims, 300));
  Eigen::VectorXd sw(300);
  for (int i = 0; i < 300; ++i) sw[i] = std::sqrt(w[static_cast<std::size_t>(i)]);
  auto b = oracle::lstsq(sw.asDiagonal() * design, sw.asDiagonal() * p.y);
  CHECK(oracle::rel_diff(r.coefficient("x1").estimate, b[0]) < 1e-8);
}

TEST_CASE("three-point 2SLS recovers an exact slope") {
  FitInput in;
  in.y.resize(3);
  in.x.resize(3, 2);
  in.z.resize(3, 2);
  in.y << 1, 3, 7;  // y = 1 + 2x
  in.x << 0, 1, 1, 1, 3, 1;
  in.z << 0, 1, 1, 1, 2, 1;
  in.x_names = {"x", "_cons"};
  in.z_names = {"z", "_cons"};
  in.n_endogenous = 1;
  in.cluster = codes({0, 1, 2}, "c");
  auto r = fit_tsls(in);
  CHECK(r.coefficient("x").estimate == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.degenerate);
  CHECK(r.coefficient("x").se == 0.0);
  CHECK(std::isnan(r.coefficient("x").t));
}

TEST_CASE("rank problems are reported") {
  auto p = random_panel(300, 1, 7);
  p.frame.set("x3", p.frame.numeric("x2"));
  auto spec = base_spec(1);
  spec.exogenous = {"x2", "x3"};
  CHECK_THROWS_AS(estimate(spec, p.frame), EstimationError);
  p.frame.set("const_in_f", as_double(p.dims[0]));
  spec.exogenous = {"x2", "const_in_f"};
  CHECK_THROWS_AS(estimate(spec, p.frame), EstimationError);
}

TEST_CASE("trimming drops the tails of outcome and main regressor") {
  auto p = random_panel(1000, 1, 8);
  auto spec = base_spec(1);
  spec.exogenous = {"x1"};
  spec.trim = TrimRule{5.0, 95.0};
  auto r = estimate(spec, p.frame);
  CHECK(r.dropped_trim >= 100);
  CHECK(r.dropped_trim <= 200);
  CHECK(r.n + r.dropped_trim + r.dropped_singletons == 1000);
}

TEST_CASE("quadratic and interacted main regressor") {
  auto p = random_panel(800, 1, 9);
  std::vector<std::string> group(800);
  for (std::size_t i = 0; i < 800; ++i) group[i] = i % 2 ? "b" : "a";
  p.frame.set("grp", group);
  auto spec = base_spec(1);
  spec.endogenous = {"x1"};
  spec.instruments = {"z"};
  spec.quadratic = true;
  auto q = estimate(spec, p.frame);
  CHECK(q.coefficients.size() == 2);
  CHECK(q.coefficients[1].name == "x1_sq");
  CHECK(std::abs(q.coefficient("x1_sq").estimate) < 4.0 * q.coefficient("x1_sq").se);
  spec.quadratic = false;
  spec.interact_by = "grp";
  auto in = estimate(spec, p.frame);
  CHECK(in.coefficients[0].name == "x1:a");
  CHECK(in.coefficients[1].name == "x1:b");
  CHECK(std::abs(in.coefficient("x1:a").estimate - 1.5) < 0.2);
}

TEST_CASE("spec validation") {
  RegressionSpec s;
  s.outcome = "y";
  s.exogenous = {"x"};
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s.cluster = "c";
  s.validate();
  s.endogenous = {"x1"};
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s.instruments = {"z"};
  s.trim = TrimRule{50.0, 90.0};
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("significance stars") {
  CHECK(significance_stars(0.005) == "***");
  CHECK(significance_stars(0.03) == "**");
  CHECK(significance_stars(0.07) == "*");
  CHECK(significance_stars(0.2).empty());
}

TEST_CASE("frame text round-trip") {
  csv::Table t;
  t.header = {"a", "b"};
  t.rows = {{"1", "x"}, {"NA", "y"}};
  auto f = Frame::from_table(t);
  auto a = f.numeric("a");
  CHECK(a[0] == 1.0);
  CHECK(std::isnan(a[1]));
  CHECK(f.text("b")[1] == "y");
  CHECK(f.to_table().rows == t.rows);
}
