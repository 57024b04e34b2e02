#include "lmt/tightness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <tuple>

namespace lmt::tightness {

ShareMode parse_share_mode(std::string_view s) {
  if (s == "yearly") return ShareMode::yearly;
  if (s == "pooled") return ShareMode::pooled;
  if (s == "registered_only") return ShareMode::registered_only;
  throw ValidationError("unknown share mode '" + std::string(s) + "'");
}

std::string_view to_string(ShareMode m) {
  switch (m) {
    case ShareMode::yearly: return "yearly";
    case ShareMode::pooled: return "pooled";
    case ShareMode::registered_only: return "registered_only";
  }
  return "?";
}

ShareTable::ShareTable(const std::vector<NotificationShare>& shares, ShareMode mode)
    : mode_(mode) {
  std::map<RequirementGroup, std::pair<double, int>> sums;
  for (const auto& s : shares) {
    if (!(s.share > 0.0 && s.share <= 1.0))
      throw ValidationError("notification share must lie in (0, 1]");
    if (s.year == 0) {
      pooled_[s.group] = s.share;
    } else {
      yearly_[{s.year, s.group}] = s.share;
      sums[s.group].first += s.share;
      sums[s.group].second += 1;
    }
  }
  if (mode_ == ShareMode::pooled)
    for (const auto& [g, acc] : sums)
      if (!pooled_.count(g)) pooled_[g] = acc.first / acc.second;
}

double ShareTable::lookup(int year, RequirementGroup group) const {
  if (mode_ == ShareMode::registered_only) return 1.0;
  if (mode_ == ShareMode::yearly) {
    auto it = yearly_.find({year, group});
    if (it != yearly_.end()) return it->second;
  }
  auto p = pooled_.find(group);
  if (p != pooled_.end()) return p->second;
  throw ValidationError("no notification share for " + std::string(lmt::to_string(group)) +
                        " in " + std::to_string(year));
}

double extrapolate_vacancies(double v_registered, double share) {
  if (!(share > 0.0 && share <= 1.0))
    throw ValidationError("notification share must lie in (0, 1]");
  return v_registered / share;
}

double extrapolate_vacancies(double v_registered, const ShareTable& shares, int requirement_digit,
                             int year) {
  return extrapolate_vacancies(v_registered,
                               shares.lookup(year, requirement_group(requirement_digit)));
}

RegionMap::RegionMap(RegionScheme scheme, std::map<std::string, std::string> zone_map)
    : scheme_(scheme), zone_map_(std::move(zone_map)) {}

std::string RegionMap::region_of(const std::string& district) const {
  switch (scheme_) {
    case RegionScheme::zones: {
      auto it = zone_map_.find(district);
      if (it == zone_map_.end())
        throw ValidationError("district '" + district + "' missing from zone map");
      return it->second;
    }
    case RegionScheme::districts: return district;
    case RegionScheme::states:
      if (district.size() < 2) throw ValidationError("district code too short: " + district);
      return district.substr(0, 2);
    case RegionScheme::government_regions:
      if (district.size() < 3) throw ValidationError("district code too short: " + district);
      return district.substr(0, 3);
  }
  throw ValidationError("unknown region scheme");
}

std::string_view to_string(CellFlag f) {
  switch (f) {
    case CellFlag::ok: return "ok";
    case CellFlag::no_seekers: return "no_seekers";
    case CellFlag::no_vacancies: return "no_vacancies";
  }
  return "?";
}

namespace {

struct CellCounts {
  std::array<std::int64_t, 3> v_by_group{0, 0, 0};
  std::int64_t u = 0;
};

}  // namespace

std::vector<MarketCell> build_cells(const std::vector<VacancyRecord>& vacancies,
                                    const std::vector<JobSeekerRecord>& seekers,
                                    const ShareTable& shares, const RegionMap& regions,
                                    const CellOptions& options) {
  // Integer counts per requirement group keep the aggregation exact, so the
  // result does not depend on row order or on intermediate pre-aggregation.
  std::map<CellKey, CellCounts> acc;
  for (const auto& v : vacancies) {
    CellKey key{market_occupation_key(v.occupation, options.occupation_digits),
                regions.region_of(v.district), v.year};
    const auto g = static_cast<std::size_t>(requirement_group(requirement_level(v.occupation)));
    acc[key].v_by_group[g] += v.v_registered;
  }
  for (const auto& u : seekers) {
    CellKey key{market_occupation_key(u.occupation, options.occupation_digits),
                regions.region_of(u.district), u.year};
    acc[key].u += u.u;
  }

  std::vector<MarketCell> cells;
  cells.reserve(acc.size());
  for (const auto& [key, c] : acc) {
    MarketCell cell;
    cell.key = key;
    cell.u = c.u;
    for (std::size_t g = 0; g < 3; ++g) {
      if (c.v_by_group[g] == 0) continue;
      cell.v_registered += c.v_by_group[g];
      cell.v_total += extrapolate_vacancies(
          static_cast<double>(c.v_by_group[g]),
          shares.lookup(key.year, static_cast<RequirementGroup>(g)));
    }
    if (cell.u <= 0) {
      cell.flag = CellFlag::no_seekers;
    } else if (!(cell.v_total > 0.0)) {
      cell.flag = CellFlag::no_vacancies;
    } else {
      cell.flag = CellFlag::ok;
      cell.theta = cell.v_total / static_cast<double>(cell.u);
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

double relative_value(double p_h_given_o, double p_o_given_o, double employment_o,
                      double employment_h) {
  if (!(p_o_given_o > 0.0)) throw ValidationError("P(o|o) must be positive");
  if (!(employment_h > 0.0)) return 0.0;
  return (p_h_given_o / p_o_given_o) * (employment_o / employment_h);
}

FlowWeights FlowWeights::from_transition_counts(std::vector<std::string> occupations,
                                                const std::vector<double>& counts,
                                                std::vector<double> employment) {
  const std::size_t n = occupations.size();
  if (counts.size() != n * n || employment.size() != n)
    throw ValidationError("transition counts must be O x O with O employment entries");
  FlowWeights w;
  w.occupations_ = std::move(occupations);
  w.employment_ = std::move(employment);
  for (std::size_t o = 0; o < n; ++o) w.index_[w.occupations_[o]] = o;
  w.omega_.assign(n * n, 0.0);
  for (std::size_t o = 0; o < n; ++o) {
    const double stay = counts[o * n + o];
    if (!(stay > 0.0)) {
      w.fallback_.insert(w.occupations_[o]);
      w.omega_[o * n + o] = 1.0;
      continue;
    }
    // P(h|o) / P(o|o) = count(o->h) / count(o->o); the denominator of P cancels
    for (std::size_t h = 0; h < n; ++h)
      w.omega_[o * n + h] =
          h == o ? 1.0 : relative_value(counts[o * n + h], stay, w.employment_[o], w.employment_[h]);
  }
  return w;
}

std::optional<std::size_t> FlowWeights::index_of(const std::string& occupation) const {
  auto it = index_.find(occupation);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

FlowWeights transition_weights(const std::vector<WorkerSpell>& spells, int occupation_digits,
                               int first_year, int last_year) {
  std::map<std::string, std::size_t> occ_index;
  std::vector<std::string> keys(spells.size());
  for (std::size_t i = 0; i < spells.size(); ++i) {
    keys[i] = market_occupation_key(spells[i].occupation, occupation_digits);
    if (spells[i].year >= first_year && spells[i].year <= last_year) occ_index.emplace(keys[i], 0);
  }
  std::vector<std::string> occupations;
  for (auto& [k, idx] : occ_index) {
    idx = occupations.size();
    occupations.push_back(k);
  }
  const std::size_t n = occupations.size();
  std::vector<double> employment(n, 0.0), counts(n * n, 0.0);

  std::vector<std::size_t> order(spells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(spells[a].worker_id, spells[a].year) <
           std::tie(spells[b].worker_id, spells[b].year);
  });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& s = spells[order[k]];
    if (s.year < first_year || s.year > last_year) continue;
    employment[occ_index.at(keys[order[k]])] += 1.0;
    if (k + 1 < order.size()) {
      const auto& next = spells[order[k + 1]];
      if (next.worker_id == s.worker_id && next.year == s.year + 1 && next.year <= last_year)
        counts[occ_index.at(keys[order[k]]) * n + occ_index.at(keys[order[k + 1]])] += 1.0;
    }
  }
  return FlowWeights::from_transition_counts(std::move(occupations), counts, std::move(employment));
}

std::vector<MarketCell> flow_adjust(std::vector<MarketCell> cells, const FlowWeights& weights) {
  // cells grouped by (region, year)
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < cells.size(); ++i)
    groups[{cells[i].key.region, cells[i].key.year}].push_back(i);

  for (const auto& [g, members] : groups) {
    std::vector<std::optional<std::size_t>> widx(members.size());
    for (std::size_t a = 0; a < members.size(); ++a)
      widx[a] = weights.index_of(cells[members[a]].key.occupation);
    for (std::size_t a = 0; a < members.size(); ++a) {
      auto& focal = cells[members[a]];
      const bool fallback =
          !widx[a] || weights.fallback().count(focal.key.occupation) > 0;
      double v = 0.0, u = 0.0;
      if (fallback) {
        v = focal.v_total;
        u = static_cast<double>(focal.u);
      } else {
        for (std::size_t b = 0; b < members.size(); ++b) {
          const auto& other = cells[members[b]];
          const double w = b == a ? 1.0 : (widx[b] ? weights.omega(*widx[a], *widx[b]) : 0.0);
          if (w == 0.0) continue;
          v += w * other.v_total;
          u += w * static_cast<double>(other.u);
        }
      }
      focal.flow_fallback = fallback;
      focal.v_flow = v;
      focal.u_flow = u;
      focal.theta_flow = u > 0.0 ? v / u : kNaN;
    }
  }
  return cells;
}

csv::Table cells_to_table(const std::vector<MarketCell>& cells) {
  csv::Table t;
  t.header = {"occupation", "region", "year",       "v_registered", "v_total",
              "u",          "theta",  "theta_flow", "flag"};
  for (const auto& c : cells) {
    std::string flag(to_string(c.flag));
    if (c.flow_fallback) flag += "|flow_fallback";
    t.rows.push_back({c.key.occupation, c.key.region, std::to_string(c.key.year),
                      std::to_string(c.v_registered), csv::format_double(c.v_total),
                      std::to_string(c.u), csv::format_double(c.theta),
                      csv::format_double(c.theta_flow), flag});
  }
  const bool has_flow = std::any_of(cells.begin(), cells.end(),
                                    [](const MarketCell& c) { return std::isfinite(c.v_flow); });
  if (has_flow) {
    t.header.insert(t.header.end(), {"v_flow", "u_flow"});
    for (std::size_t i = 0; i < cells.size(); ++i)
      t.rows[i].insert(t.rows[i].end(), {csv::format_double(cells[i].v_flow),
                                         csv::format_double(cells[i].u_flow)});
  }
  return t;
}

std::vector<MarketCell> cells_from_table(const csv::Table& t) {
  const std::string name = "cells";
  const auto c_occ = t.require_column("occupation", name);
  const auto c_region = t.require_column("region", name);
  const auto c_year = t.require_column("year", name);
  const auto c_vreg = t.require_column("v_registered", name);
  const auto c_vtot = t.require_column("v_total", name);
  const auto c_u = t.require_column("u", name);
  const auto c_flow = t.column("theta_flow");
  const auto c_vflow = t.column("v_flow");
  const auto c_uflow = t.column("u_flow");
  const auto c_flag = t.column("flag");
  std::vector<MarketCell> out;
  out.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& r = t.rows[i];
    auto fail = [&] {
      return ValidationError("cells line " + std::to_string(t.line_numbers[i]) + ": malformed row");
    };
    if (r.size() != t.header.size()) throw fail();
    MarketCell c;
    c.key.occupation = r[c_occ];
    c.key.region = r[c_region];
    auto y = csv::parse_int(r[c_year]);
    auto vr = csv::parse_int(r[c_vreg]);
    auto vt = csv::parse_double(r[c_vtot]);
    auto u = csv::parse_int(r[c_u]);
    if (!y || !vr || !vt || !u) throw fail();
    c.key.year = static_cast<int>(*y);
    c.v_registered = *vr;
    c.v_total = *vt;
    c.u = *u;
    if (c.u <= 0) {
      c.flag = CellFlag::no_seekers;
    } else if (!(c.v_total > 0.0)) {
      c.flag = CellFlag::no_vacancies;
    } else {
      c.theta = c.v_total / static_cast<double>(c.u);
    }
    if (c_flow) c.theta_flow = csv::parse_double(r[*c_flow]).value_or(kNaN);
    if (c_vflow) c.v_flow = csv::parse_double(r[*c_vflow]).value_or(kNaN);
    if (c_uflow) c.u_flow = csv::parse_double(r[*c_uflow]).value_or(kNaN);
    if (c_flag) c.flow_fallback = r[*c_flag].find("flow_fallback") != std::string::npos;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace lmt::tightness
