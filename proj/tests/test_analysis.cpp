#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "lmt/analysis.hpp"

using namespace lmt;
using namespace lmt::analysis;

TEST_CASE("contribution of tightness growth to wage growth") {
  auto hi = contribution_share(0.0113, 133.3, 7.9);
  auto lo = contribution_share(0.0044, 133.3, 7.9);
  CHECK(std::abs(hi.share_pct - 19.1) <= 0.1);
  CHECK(std::abs(lo.share_pct - 7.4) <= 0.1);
  CHECK(hi.wage_effect_pct == doctest::Approx(1.50629));
  CHECK_THROWS_AS(contribution_share(0.01, 100.0, 0.0), ValidationError);
}

TEST_CASE("level coefficient from the elasticity") {
  const double hi = wage_setting_level(0.0113, 106.25, 0.24, 2.3639e12, 4.1586e7, 365.0);
  const double lo = wage_setting_level(0.0044, 106.25, 0.24, 2.3639e12, 4.1586e7, 365.0);
  CHECK(std::abs(hi - 0.032) <= 0.001);
  CHECK(std::abs(lo - 0.013) <= 0.001);
  CHECK_THROWS_AS(wage_setting_level(0.01, 0.0, 0.24, 1.0, 1.0, 1.0), ValidationError);
}

TEST_CASE("decile counterfactual gap") {
  std::vector<double> observed = {20.0, 15.0, 10.0};
  std::vector<double> elasticity = {0.02, 0.01, 0.005};
  std::vector<double> growth = {150.0, 130.0, 120.0};
  auto d = decile_counterfactual(observed, elasticity, growth);
  CHECK(d.counterfactual[0] == doctest::Approx(17.0));
  CHECK(d.counterfactual[2] == doctest::Approx(9.4));
  CHECK(d.gap_observed == doctest::Approx(-10.0));
  CHECK(d.gap_counterfactual == doctest::Approx(-7.6));
  CHECK(d.gap_change == doctest::Approx(-2.4));
  std::vector<double> short_growth = {1.0};
  CHECK_THROWS_AS(decile_counterfactual(observed, elasticity, short_growth), ValidationError);
}

TEST_CASE("worker effects on a balanced two-way panel") {
  // y = a_w + b_t exactly; effects are identified up to a shift
  std::vector<double> a = {1.0, 2.0, 4.0}, b = {0.0, 0.5, -1.0};
  std::vector<double> y;
  std::vector<std::int64_t> w, t;
  for (int i = 0; i < 3; ++i)
    for (int s = 0; s < 3; ++s) {
      y.push_back(a[static_cast<std::size_t>(i)] + b[static_cast<std::size_t>(s)]);
      w.push_back(i);
      t.push_back(s);
    }
  auto eff = partial_worker_effects(y, {estimator::encode_codes("w", w), estimator::encode_codes("t", t)});
  CHECK(eff[3] - eff[0] == doctest::Approx(1.0));
  CHECK(eff[6] - eff[0] == doctest::Approx(3.0));
  std::vector<double> resid(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) resid[i] = y[i] - eff[i];
  std::vector<std::string> firm(9, "f");
  std::vector<int> year;
  for (auto v : t) year.push_back(2012 + static_cast<int>(v));
  auto fy = firm_average_outcome(firm, year, y, eff);
  REQUIRE(fy.size() == 3);
  CHECK(fy[1].outcome - fy[0].outcome == doctest::Approx(0.5));
  CHECK(fy[0].workers == 3);
}

TEST_CASE("binscatter bins are equal-count and ordered") {
  std::vector<double> x(100), y(100);
  for (int i = 0; i < 100; ++i) {
    x[static_cast<std::size_t>(i)] = 99 - i;
    y[static_cast<std::size_t>(i)] = 2.0 * (99 - i);
  }
  auto b = binscatter(x, y, 10);
  REQUIRE(b.bins.size() == 10);
  CHECK(b.warnings.empty());
  CHECK(b.bins[0].n == 10);
  CHECK(b.bins[0].mean_x == doctest::Approx(4.5));
  CHECK(b.bins[9].mean_y == doctest::Approx(189.0));
}

TEST_CASE("tied x values share a bin") {
  std::vector<double> x = {1, 1, 1, 1, 2, 2, 3, 3};
  std::vector<double> y = {0, 1, 2, 3, 4, 5, 6, 7};
  auto b = binscatter(x, y, 4);
  CHECK(b.bins.size() == 3);
  CHECK(b.bins[0].n == 4);
  CHECK(b.warnings.size() == 1);
  CHECK(binscatter_to_table(b).rows.size() == 3);
}

TEST_CASE("partialled binscatter removes a group shift") {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> z(0.0, 1.0);
  const std::size_t n = 2000;
  std::vector<double> x(n), y(n);
  std::vector<std::int64_t> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = static_cast<std::int64_t>(i % 2);
    x[i] = z(gen) + 3.0 * static_cast<double>(g[i]);
    y[i] = 0.5 * x[i] - 4.0 * static_cast<double>(g[i]) + 0.1 * z(gen);
  }
  PartialOut p;
  p.dims = {estimator::encode_codes("g", g)};
  auto b = binscatter(x, y, 20, &p);
  const auto& first = b.bins.front();
  const auto& last = b.bins.back();
  const double slope = (last.mean_y - first.mean_y) / (last.mean_x - first.mean_x);
  CHECK(slope == doctest::Approx(0.5).epsilon(0.05));
}
