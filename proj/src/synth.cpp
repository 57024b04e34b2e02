#include "lmt/synth.hpp"

#include <cmath>
#include <cstdio>

#include "lmt/instruments.hpp"
#include "lmt/rng.hpp"

namespace lmt::synth {

namespace {

// One random stream per model component.
enum Stream : std::uint64_t {
  kMarketIntercept = 1,
  kSeekerLevel,
  kMarketWageFe,
  kNational,
  kSupply,
  kRegional,
  kMarketWage,
  kSeekerNoise,
  kSeekerCount,
  kYearFe,
  kWorkerFe,
  kWorkerAge,
  kFirmFe,
  kFirmStart,
  kFirmMove,
  kWageNoise,
};

}  // namespace

void SynthConfig::validate() const {
  if (occupations < 2) throw ValidationError("synth: need at least 2 occupations");
  if (regions < 3) throw ValidationError("synth: need at least 3 regions");
  if (years < 2) throw ValidationError("synth: need at least 2 years");
  if (workers_per_market < 1) throw ValidationError("synth: need at least 1 worker per market");
  if (firms_per_region < 2) throw ValidationError("synth: need at least 2 firms per region");
  if (occupations > 3600) throw ValidationError("synth: at most 3600 occupations");
  if (regions > 98000) throw ValidationError("synth: too many regions");
  if (rho < 0.0 || delta < 0.0) throw ValidationError("synth: rho and delta must be nonnegative");
  for (double sd : {sd_market, sd_national, sd_supply, sd_regional, sd_market_wage, sd_worker,
                    sd_firm, sd_market_fe, sd_year_fe, sd_noise, sd_seekers_market,
                    sd_seekers_noise})
    if (!(sd >= 0.0)) throw ValidationError("synth: standard deviations must be nonnegative");
  if (!(mean_seekers > 0.0)) throw ValidationError("synth: mean_seekers must be positive");
  if (!(switch_prob >= 0.0 && switch_prob <= 1.0))
    throw ValidationError("synth: switch_prob must lie in [0, 1]");
}

std::string occupation_code(int o) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%03d0%d", 100 + o / 4, 1 + o % 4);
  return buf;
}

std::string district_code(int r) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%05d", 1001 + r);
  return buf;
}

SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthData out;
  out.config = cfg;
  out.truth = {cfg.alpha_true, cfg.rho, cfg.delta, cfg.seed};
  const int O = cfg.occupations, R = cfg.regions, T = cfg.years, W = cfg.workers_per_market,
            F = cfg.firms_per_region;
  auto stream = [&](Stream s) { return rng::Counter(cfg.seed, s); };
  const auto g_mu = stream(kMarketIntercept), g_ubar = stream(kSeekerLevel),
             g_phi = stream(kMarketWageFe), g_eta = stream(kNational), g_zeta = stream(kSupply),
             g_nu = stream(kRegional), g_eps = stream(kMarketWage),
             g_unoise = stream(kSeekerNoise), g_ucount = stream(kSeekerCount),
             g_year = stream(kYearFe), g_worker = stream(kWorkerFe), g_age = stream(kWorkerAge),
             g_firm = stream(kFirmFe), g_start = stream(kFirmStart), g_move = stream(kFirmMove),
             g_noise = stream(kWageNoise);

  std::vector<double> year_fe(T), firm_fe(static_cast<std::size_t>(R) * F);
  for (int t = 0; t < T; ++t) year_fe[t] = cfg.sd_year_fe * g_year.normal(t);
  for (std::size_t j = 0; j < firm_fe.size(); ++j) firm_fe[j] = cfg.sd_firm * g_firm.normal(j);
  std::vector<double> eta(static_cast<std::size_t>(O) * T), zeta(eta.size());
  for (int o = 0; o < O; ++o)
    for (int t = 0; t < T; ++t) {
      eta[o * T + t] = cfg.sd_national * g_eta.normal(o, t);
      zeta[o * T + t] = cfg.sd_supply * g_zeta.normal(o, t);
    }

  // cells: loop order (o, r, t) is the sorted key order
  const std::size_t n_cells = static_cast<std::size_t>(O) * R * T;
  out.cells.resize(n_cells);
  std::vector<double> eps(n_cells), log_theta(n_cells);
  std::vector<std::string> occ_keys(O), districts(R);
  for (int o = 0; o < O; ++o) occ_keys[o] = market_occupation_key(occupation_code(o), 3);
  for (int r = 0; r < R; ++r) districts[r] = district_code(r);
  for (int o = 0; o < O; ++o)
    for (int r = 0; r < R; ++r) {
      const double mu = cfg.base_log_theta + cfg.sd_market * g_mu.normal(o, r);
      const double log_ubar = std::log(cfg.mean_seekers) + cfg.sd_seekers_market * g_ubar.normal(o, r);
      for (int t = 0; t < T; ++t) {
        const std::size_t c = (static_cast<std::size_t>(o) * R + r) * T + t;
        const double e = cfg.sd_market_wage * g_eps.normal(o, r, t);
        const double latent =
            mu + cfg.trend * t + eta[o * T + t] - zeta[o * T + t] + cfg.sd_regional * g_nu.normal(o, r, t);
        const double realized = latent - cfg.rho * e;
        const double u_mean =
            std::exp(log_ubar + zeta[o * T + t] + cfg.sd_seekers_noise * g_unoise.normal(o, r, t));
        const std::int64_t u = 5 + g_ucount.poisson(u_mean, o, r, t);
        const std::int64_t v =
            std::max<std::int64_t>(1, std::llround(std::exp(realized) * static_cast<double>(u)));
        auto& cell = out.cells[c];
        cell.key = {occ_keys[o], districts[r], cfg.first_year + t};
        cell.v_registered = v;
        cell.v_total = static_cast<double>(v);
        cell.u = u;
        cell.theta = static_cast<double>(v) / static_cast<double>(u);
        cell.flag = tightness::CellFlag::ok;
        eps[c] = e;
        log_theta[c] = std::log(cell.theta);
      }
    }

  // workers
  const std::size_t n_rows = static_cast<std::size_t>(O) * R * W * T;
  auto& rows = out.rows;
  for (auto* v : {&rows.worker, &rows.firm, &rows.occupation, &rows.region, &rows.year, &rows.age,
                  &rows.cell})
    v->resize(n_rows);
  rows.hire.resize(n_rows);
  rows.log_wage.resize(n_rows);
  std::size_t i = 0;
  for (int o = 0; o < O; ++o)
    for (int r = 0; r < R; ++r) {
      const double phi = cfg.sd_market_fe * g_phi.normal(o, r);
      for (int k = 0; k < W; ++k) {
        const std::int64_t id = (static_cast<std::int64_t>(o) * R + r) * W + k;
        const double a = cfg.sd_worker * g_worker.normal(id);
        const int age0 = 20 + static_cast<int>(g_age.uniform(id) * 30.0);
        int j = static_cast<int>(g_start.uniform(id) * F);
        for (int t = 0; t < T; ++t, ++i) {
          bool hired = t == 0;
          if (t > 0 && g_move.uniform(id, t, 0) < cfg.switch_prob) {
            j = (j + 1 + static_cast<int>(g_move.uniform(id, t, 1) * (F - 1))) % F;
            hired = true;
          }
          const std::size_t c = (static_cast<std::size_t>(o) * R + r) * T + t;
          const int age = age0 + t;
          const int firm = r * F + j;
          rows.worker[i] = static_cast<std::int32_t>(id);
          rows.firm[i] = firm;
          rows.occupation[i] = o;
          rows.region[i] = r;
          rows.year[i] = cfg.first_year + t;
          rows.age[i] = age;
          rows.cell[i] = static_cast<std::int32_t>(c);
          rows.hire[i] = hired;
          rows.log_wage[i] = cfg.base_log_wage + cfg.alpha_true * log_theta[c] + year_fe[t] +
                             cfg.age_sq_coef * age * age / 100.0 + a + firm_fe[firm] + phi +
                             cfg.delta * eta[o * T + t] + eps[c] +
                             cfg.sd_noise * g_noise.normal(id, t);
        }
      }
    }
  return out;
}

estimator::Frame panel_frame(const SynthData& data) {
  const auto inst = instruments::build(data.cells);
  const auto& rows = data.rows;
  const std::size_t n = rows.size();
  const int R = data.config.regions;
  std::vector<double> worker(n), firm(n), year(n), occupation(n), region(n), market(n),
      log_wage(n), log_theta(n), log_theta_flow(n, kNaN), z1(n), z2(n), loo(n), age(n), age_sq(n),
      hire(n), east(n, 0.0), industry(n), weight(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(rows.cell[i]);
    worker[i] = rows.worker[i];
    firm[i] = rows.firm[i];
    year[i] = rows.year[i];
    occupation[i] = rows.occupation[i];
    region[i] = rows.region[i];
    market[i] = rows.occupation[i] * R + rows.region[i];
    log_wage[i] = rows.log_wage[i];
    log_theta[i] = std::log(data.cells[c].theta);
    z1[i] = inst[c].z1;
    z2[i] = inst[c].z2;
    loo[i] = inst[c].loo_log_v_sum;
    age[i] = rows.age[i];
    age_sq[i] = rows.age[i] * static_cast<double>(rows.age[i]) / 100.0;
    hire[i] = rows.hire[i];
    industry[i] = 1 + rows.firm[i] % 9;
  }
  estimator::Frame f;
  f.set("worker_id", std::move(worker));
  f.set("firm_id", std::move(firm));
  f.set("year", std::move(year));
  f.set("occupation", std::move(occupation));
  f.set("region", std::move(region));
  f.set("market", std::move(market));
  f.set("log_wage", std::move(log_wage));
  f.set("log_theta", std::move(log_theta));
  f.set("log_theta_flow", std::move(log_theta_flow));
  f.set("z1", std::move(z1));
  f.set("z2", std::move(z2));
  f.set("loo_log_v_sum", std::move(loo));
  f.set("age", std::move(age));
  f.set("age_sq", std::move(age_sq));
  f.set("hire", std::move(hire));
  f.set("east", std::move(east));
  f.set("industry", std::move(industry));
  f.set("weight", std::move(weight));
  return f;
}

CpiSeries cpi(const SynthData& data) {
  std::map<int, double> idx;
  for (int t = 0; t < data.config.years; ++t)
    idx[data.config.first_year + t] = 100.0 * std::pow(1.0 + data.config.cpi_growth, t);
  return CpiSeries(std::move(idx));
}

std::vector<WorkerSpell> spells(const SynthData& data) {
  const auto& rows = data.rows;
  const auto index = cpi(data);
  std::vector<WorkerSpell> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& s = out[i];
    s.worker_id = std::to_string(rows.worker[i]);
    s.year = rows.year[i];
    s.firm_id = "F" + std::to_string(rows.firm[i]);
    s.occupation = occupation_code(rows.occupation[i]);
    s.district = district_code(rows.region[i]);
    s.wage_nominal = std::exp(rows.log_wage[i]) * index.at(s.year) / 100.0;
    s.censored = false;
    s.age = rows.age[i];
    s.industry = 1 + rows.firm[i] % 9;
    s.hire = rows.hire[i];
  }
  return out;
}

std::vector<VacancyRecord> vacancies(const SynthData& data) {
  const int T = data.config.years;
  std::vector<VacancyRecord> out;
  out.reserve(data.cells.size());
  for (std::size_t c = 0; c < data.cells.size(); ++c) {
    const int o = static_cast<int>(c / (static_cast<std::size_t>(data.config.regions) * T));
    const auto& cell = data.cells[c];
    out.push_back({occupation_code(o), cell.key.region, cell.key.year, cell.v_registered});
  }
  return out;
}

std::vector<JobSeekerRecord> seekers(const SynthData& data) {
  const int T = data.config.years;
  std::vector<JobSeekerRecord> out;
  out.reserve(data.cells.size());
  for (std::size_t c = 0; c < data.cells.size(); ++c) {
    const int o = static_cast<int>(c / (static_cast<std::size_t>(data.config.regions) * T));
    const auto& cell = data.cells[c];
    out.push_back({occupation_code(o), cell.key.region, cell.key.year, cell.u});
  }
  return out;
}

std::vector<NotificationShare> shares(const SynthData& data) {
  std::vector<NotificationShare> out;
  for (int t = 0; t < data.config.years; ++t)
    for (auto g : {RequirementGroup::helpers, RequirementGroup::professionals,
                   RequirementGroup::specialists_experts})
      out.push_back({data.config.first_year + t, g, 1.0});
  return out;
}

csv::Table zone_table(const SynthData& data) {
  csv::Table t;
  t.header = {"district", "zone", "threshold", "q"};
  for (int r = 0; r < data.config.regions; ++r)
    t.rows.push_back({district_code(r), std::to_string(r + 1), "NA", "NA"});
  return t;
}

}  // namespace lmt::synth
