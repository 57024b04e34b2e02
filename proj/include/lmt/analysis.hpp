#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lmt/estimator.hpp"

namespace lmt::analysis {

struct Contribution {
  double wage_effect_pct = 0.0;  // elasticity x tightness growth
  double share_pct = 0.0;        // share of observed wage growth
};

// Percent convention: elasticity times percent change of tightness.
Contribution contribution_share(double elasticity, double tightness_growth_pct,
                                double wage_growth_pct);

// Daily productivity = gva / (workforce x days); returns
// elasticity x (w0 / theta0) / productivity.
double wage_setting_level(double elasticity, double w0, double theta0, double gva,
                          double workforce, double days);

struct DecileCounterfactual {
  std::vector<double> counterfactual;
  double gap_observed = 0.0;        // top minus bottom decile, observed growth
  double gap_counterfactual = 0.0;  // same for counterfactual growth
  double gap_change = 0.0;          // gap_observed - gap_counterfactual
};

DecileCounterfactual decile_counterfactual(std::span<const double> observed_growth_pct,
                                           std::span<const double> elasticity,
                                           std::span<const double> tightness_growth_pct);

// Worker effects of y = a_worker + sum of other effects + e, estimated by
// alternating group means; returns the worker effect for every row.
// dims[0] must be the worker dimension.
std::vector<double> partial_worker_effects(std::span<const double> y,
                                           const std::vector<estimator::FactorCodes>& dims,
                                           double tol = 1e-10, std::size_t max_sweeps = 10000);

struct FirmYearOutcome {
  std::string firm;
  int year = 0;
  double outcome = 0.0;  // mean of log wage minus worker effect
  std::size_t workers = 0;
};

// Rows sorted by (firm, year).
std::vector<FirmYearOutcome> firm_average_outcome(std::span<const std::string> firm,
                                                  std::span<const int> year,
                                                  std::span<const double> log_wage,
                                                  std::span<const double> worker_effect);

struct Bin {
  std::size_t bin = 0;
  std::size_t n = 0;
  double mean_x = 0.0;
  double mean_y = 0.0;
};

struct Binscatter {
  std::vector<Bin> bins;
  std::vector<std::string> warnings;
};

struct PartialOut {
  std::vector<estimator::FactorCodes> dims;
  Eigen::MatrixXd controls;  // n x k, may have zero columns
  std::vector<double> weights;
};

// Equal-count bins over x sorted by (x, y). Rows with equal x share a bin,
// so fewer distinct values than bins collapse bins (with a warning). With
// `partial`, x and y are residualized on the fixed effects and controls and
// their sample means added back.
Binscatter binscatter(std::span<const double> x, std::span<const double> y, std::size_t n_bins,
                      const PartialOut* partial = nullptr);

csv::Table binscatter_to_table(const Binscatter& b);

}  // namespace lmt::analysis
