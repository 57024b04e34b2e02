#include "lmt/panel.hpp"

#include <cmath>
#include <map>

namespace lmt::panel {

estimator::Frame build(const std::vector<WorkerSpell>& spells,
                       const std::vector<tightness::MarketCell>& cells,
                       const tightness::RegionMap& regions, const PanelOptions& options) {
  const auto inst = instruments::build(cells, options.measure);
  std::map<tightness::CellKey, std::size_t> index;
  for (std::size_t c = 0; c < cells.size(); ++c) index.emplace(cells[c].key, c);

  const std::size_t n = spells.size();
  std::vector<std::string> worker(n), firm(n), occupation(n), region(n), market(n), education(n),
      gender(n);
  std::vector<double> year(n), log_wage(n), log_theta(n, kNaN), log_theta_flow(n, kNaN),
      z1(n, kNaN), z2(n, kNaN), loo(n, kNaN), age(n), age_sq(n), hire(n), east(n), industry(n),
      weight(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = spells[i];
    worker[i] = s.worker_id;
    firm[i] = s.firm_id;
    year[i] = s.year;
    occupation[i] = market_occupation_key(s.occupation, options.occupation_digits);
    region[i] = regions.region_of(s.district);
    market[i] = occupation[i] + "|" + region[i];
    log_wage[i] = std::log(s.wage_real.value_or(s.wage_nominal));
    age[i] = s.age;
    age_sq[i] = s.age * static_cast<double>(s.age) / 100.0;
    hire[i] = s.hire;
    east[i] = s.east;
    industry[i] = s.industry;
    education[i] = std::string(to_string(s.education));
    gender[i] = std::string(to_string(s.gender));
    weight[i] = s.weight;
    auto it = index.find({occupation[i], region[i], s.year});
    if (it == index.end()) continue;
    const auto& cell = cells[it->second];
    if (cell.theta_defined()) log_theta[i] = std::log(cell.theta);
    if (std::isfinite(cell.theta_flow) && cell.theta_flow > 0.0)
      log_theta_flow[i] = std::log(cell.theta_flow);
    z1[i] = inst[it->second].z1;
    z2[i] = inst[it->second].z2;
    loo[i] = inst[it->second].loo_log_v_sum;
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
  f.set("education", std::move(education));
  f.set("gender", std::move(gender));
  f.set("weight", std::move(weight));
  return f;
}

}  // namespace lmt::panel
