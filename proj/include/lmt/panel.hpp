#pragma once

#include <vector>

#include "lmt/data_model.hpp"
#include "lmt/estimator.hpp"
#include "lmt/instruments.hpp"
#include "lmt/tightness.hpp"

namespace lmt::panel {

// Columns of an estimation panel, one row per worker-year:
// worker_id, firm_id, year, occupation, region, market, log_wage, log_theta,
// log_theta_flow, z1, z2, loo_log_v_sum, age, age_sq, hire, east, industry,
// education, gender, weight. age_sq is age^2 / 100. Undefined values are NaN.
struct PanelOptions {
  int occupation_digits = 3;
  instruments::Measure measure = instruments::Measure::baseline;
};

// Joins spells (real wages when present, else nominal) with their market
// cell and its leave-one-out instruments. Spells without a cell keep NaN
// tightness columns.
estimator::Frame build(const std::vector<WorkerSpell>& spells,
                       const std::vector<tightness::MarketCell>& cells,
                       const tightness::RegionMap& regions, const PanelOptions& options = {});

}  // namespace lmt::panel
