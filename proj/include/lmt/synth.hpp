#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmt/data_model.hpp"
#include "lmt/estimator.hpp"
#include "lmt/tightness.hpp"

namespace lmt::synth {

struct SynthConfig {
  double alpha_true = 0.011;  // elasticity of log wage in log tightness
  double rho = 0.0;           // feedback of the market wage shock on log tightness
  double delta = 0.0;         // direct wage passthrough of the national shock

  int occupations = 200;
  int regions = 10;
  int years = 11;
  int first_year = 2012;
  int workers_per_market = 50;
  int firms_per_region = 20;

  double base_log_theta = -0.9;
  double trend = 0.08;             // yearly drift of log tightness
  double sd_market = 0.4;          // market intercept of log tightness
  double sd_national = 0.15;       // occupation-year demand shock (eta)
  double sd_supply = 0.15;         // occupation-year seeker supply shock (zeta)
  double sd_regional = 0.05;       // market-year tightness disturbance (nu)
  double sd_market_wage = 0.05;    // market-year wage disturbance (epsilon)
  double sd_worker = 0.3;
  double sd_firm = 0.1;
  double sd_market_fe = 0.1;
  double sd_year_fe = 0.02;
  double sd_noise = 0.1;
  double mean_seekers = 200.0;
  double sd_seekers_market = 0.3;
  double sd_seekers_noise = 0.02;
  double base_log_wage = 4.6;
  double age_sq_coef = -0.02;  // per age^2 / 100
  double switch_prob = 0.1;    // yearly probability of a firm change
  double cpi_growth = 0.015;

  std::uint64_t seed = 1;

  void validate() const;
};

// Compact worker-year rows. Ids are dense integers.
struct PanelRows {
  std::vector<std::int32_t> worker, firm, occupation, region, year, age;
  std::vector<std::int32_t> cell;  // index into SynthData::cells
  std::vector<char> hire;
  std::vector<double> log_wage;  // real log daily wage
  std::size_t size() const { return worker.size(); }
};

struct Truth {
  double alpha_true = 0.0;
  double rho = 0.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
};

struct SynthData {
  SynthConfig config;
  std::vector<tightness::MarketCell> cells;  // sorted by key, theta = V / U
  PanelRows rows;
  Truth truth;
};

SynthData generate(const SynthConfig& config);

// 5-digit codes "xyz0d": group xyz = 100 + o / 4, requirement d = 1 + o % 4.
std::string occupation_code(int o);
// 5-digit district codes starting at "01001".
std::string district_code(int r);

// Estimation panel with the same column names as panel::build.
estimator::Frame panel_frame(const SynthData& data);

// Input tables in the ingestion schemas.
std::vector<WorkerSpell> spells(const SynthData& data);
std::vector<VacancyRecord> vacancies(const SynthData& data);
std::vector<JobSeekerRecord> seekers(const SynthData& data);
std::vector<NotificationShare> shares(const SynthData& data);  // all 1
CpiSeries cpi(const SynthData& data);                           // base = first year
csv::Table zone_table(const SynthData& data);                    // identity partition

}  // namespace lmt::synth
