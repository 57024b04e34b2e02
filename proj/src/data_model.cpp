#include "lmt/data_model.hpp"

#include <algorithm>
#include <set>
#include <tuple>
#include <unordered_map>

#include "lmt/common.hpp"

namespace lmt {

std::string_view to_string(Education e) {
  switch (e) {
    case Education::low: return "low";
    case Education::medium: return "medium";
    case Education::high: return "high";
  }
  return "?";
}

std::string_view to_string(Gender g) { return g == Gender::male ? "male" : "female"; }

std::string_view to_string(Nationality n) {
  return n == Nationality::native ? "native" : "foreign";
}

std::string_view to_string(RequirementGroup g) {
  switch (g) {
    case RequirementGroup::helpers: return "helpers";
    case RequirementGroup::professionals: return "professionals";
    case RequirementGroup::specialists_experts: return "specialists_experts";
  }
  return "?";
}

std::string_view to_string(RegionScheme s) {
  switch (s) {
    case RegionScheme::zones: return "zones";
    case RegionScheme::states: return "states";
    case RegionScheme::government_regions: return "government_regions";
    case RegionScheme::districts: return "districts";
  }
  return "?";
}

Education parse_education(std::string_view s) {
  if (s == "low" || s == "1") return Education::low;
  if (s == "medium" || s == "2") return Education::medium;
  if (s == "high" || s == "3") return Education::high;
  throw ValidationError("unknown education value '" + std::string(s) + "'");
}

Gender parse_gender(std::string_view s) {
  if (s == "male" || s == "m" || s == "M") return Gender::male;
  if (s == "female" || s == "f" || s == "F") return Gender::female;
  throw ValidationError("unknown gender value '" + std::string(s) + "'");
}

Nationality parse_nationality(std::string_view s) {
  if (s == "native") return Nationality::native;
  if (s == "foreign") return Nationality::foreign;
  throw ValidationError("unknown nationality value '" + std::string(s) + "'");
}

RequirementGroup parse_requirement_group(std::string_view s) {
  if (s == "helpers") return RequirementGroup::helpers;
  if (s == "professionals") return RequirementGroup::professionals;
  if (s == "specialists_experts") return RequirementGroup::specialists_experts;
  throw ValidationError("unknown requirement_group value '" + std::string(s) + "'");
}

RegionScheme parse_region_scheme(std::string_view s) {
  if (s == "zones") return RegionScheme::zones;
  if (s == "states") return RegionScheme::states;
  if (s == "government_regions") return RegionScheme::government_regions;
  if (s == "districts") return RegionScheme::districts;
  throw ValidationError("unknown region scheme '" + std::string(s) + "'");
}

bool is_valid_occupation(std::string_view occ) {
  if (occ.size() != 5) return false;
  for (char c : occ)
    if (c < '0' || c > '9') return false;
  return occ[4] >= '1' && occ[4] <= '4';
}

int requirement_level(std::string_view occ) {
  if (!is_valid_occupation(occ))
    throw ValidationError("malformed occupation code '" + std::string(occ) + "'");
  return occ[4] - '0';
}

RequirementGroup requirement_group(int level) {
  switch (level) {
    case 1: return RequirementGroup::helpers;
    case 2: return RequirementGroup::professionals;
    case 3:
    case 4: return RequirementGroup::specialists_experts;
  }
  throw ValidationError("requirement level must be 1-4, got " + std::to_string(level));
}

std::string market_occupation_key(std::string_view occ, int digits) {
  if (digits < 2 || digits > 4)
    throw ValidationError("occupation_digits must be 2, 3 or 4");
  if (!is_valid_occupation(occ))
    throw ValidationError("malformed occupation code '" + std::string(occ) + "'");
  std::string key(occ.substr(0, static_cast<std::size_t>(digits)));
  key.push_back('-');
  key.push_back(occ[4]);
  return key;
}

CpiSeries::CpiSeries(std::map<int, double> index) : index_(std::move(index)) {
  for (const auto& [y, v] : index_)
    if (!(v > 0.0))
      throw ValidationError("cpi value for " + std::to_string(y) + " must be positive");
}

double CpiSeries::at(int year) const {
  auto it = index_.find(year);
  if (it == index_.end()) throw ValidationError("cpi has no value for year " + std::to_string(year));
  return it->second;
}

void CpiSeries::check_base(int base_year) const {
  auto it = index_.find(base_year);
  if (it == index_.end())
    throw ValidationError("cpi base year " + std::to_string(base_year) + " missing");
  if (std::abs(it->second - 100.0) > 1e-9)
    throw ValidationError("cpi base year " + std::to_string(base_year) + " must equal 100");
}

void PanelConfig::validate() const {
  if (occupation_digits < 2 || occupation_digits > 4)
    throw ValidationError("occupation_digits must be 2, 3 or 4");
  if (first_year > last_year) throw ValidationError("years range is empty");
  if (trim) {
    if (trim->lower_pct < 0.0 || trim->lower_pct >= 50.0 || trim->upper_pct <= 50.0 ||
        trim->upper_pct > 100.0 || trim->lower_pct >= trim->upper_pct)
      throw ValidationError("trim percentiles must satisfy 0 <= lower < 50 < upper <= 100");
  }
}

namespace {

struct RowReject {
  std::string reason;
};

const std::string& field(const std::vector<std::string>& row, std::size_t idx) {
  static const std::string empty;
  return idx < row.size() ? row[idx] : empty;
}

double need_double(const std::vector<std::string>& row, std::size_t idx, const char* name) {
  auto v = csv::parse_double(field(row, idx));
  if (!v || !std::isfinite(*v)) throw RowReject{std::string("bad or missing ") + name};
  return *v;
}

std::int64_t need_int(const std::vector<std::string>& row, std::size_t idx, const char* name) {
  auto v = csv::parse_int(field(row, idx));
  if (!v) throw RowReject{std::string("bad or missing ") + name};
  return *v;
}

const std::string& need_text(const std::vector<std::string>& row, std::size_t idx,
                             const char* name) {
  const auto& f = field(row, idx);
  if (f.empty()) throw RowReject{std::string("missing ") + name};
  return f;
}

std::string need_occupation(const std::vector<std::string>& row, std::size_t idx) {
  const auto& f = need_text(row, idx, "occupation");
  if (!is_valid_occupation(f)) throw RowReject{"malformed occupation code '" + f + "'"};
  return f;
}

// Runs `body` per row; RowReject becomes a diagnostic, ValidationError is
// rethrown with the line number attached.
template <typename Body>
void for_each_row(const csv::Table& t, const std::string& name, LoadDiagnostics& diag,
                  Body&& body) {
  diag.rows_read[name] += t.size();
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& row = t.rows[i];
    try {
      if (row.size() != t.header.size())
        throw RowReject{"expected " + std::to_string(t.header.size()) + " fields, got " +
                        std::to_string(row.size())};
      body(row, t.line_numbers[i]);
      ++accepted;
    } catch (const RowReject& r) {
      diag.rejected.push_back({name, t.line_numbers[i], r.reason});
    } catch (const ValidationError& e) {
      throw ValidationError(name + " line " + std::to_string(t.line_numbers[i]) + ": " +
                            e.what());
    }
  }
  diag.rows_accepted[name] += accepted;
}

[[noreturn]] void duplicate(const std::string& table, std::size_t line, const std::string& key) {
  throw ValidationError(table + " line " + std::to_string(line) + ": duplicate key " + key);
}

}  // namespace

std::vector<WorkerSpell> parse_spells(const csv::Table& t, const PanelConfig& config,
                                      LoadDiagnostics& diag) {
  const std::string name = "spells";
  const auto c_worker = t.require_column("worker_id", name);
  const auto c_year = t.require_column("year", name);
  const auto c_firm = t.require_column("firm_id", name);
  const auto c_occ = t.require_column("occupation", name);
  const auto c_district = t.require_column("district", name);
  const auto c_wage = t.require_column("wage", name);
  const auto c_cens = t.require_column("censored", name);
  const auto c_age = t.require_column("age", name);
  const auto c_edu = t.require_column("education", name);
  const auto c_gender = t.require_column("gender", name);
  const auto c_nat = t.require_column("nationality", name);
  const auto c_east = t.require_column("east", name);
  const auto c_ind = t.require_column("industry", name);
  const auto c_weight = t.column("weight");

  std::vector<WorkerSpell> out;
  out.reserve(t.size());
  std::set<std::pair<std::string, int>> seen;
  for_each_row(t, name, diag, [&](const std::vector<std::string>& row, std::size_t line) {
    WorkerSpell s;
    s.worker_id = need_text(row, c_worker, "worker_id");
    s.year = static_cast<int>(need_int(row, c_year, "year"));
    s.firm_id = need_text(row, c_firm, "firm_id");
    s.occupation = need_occupation(row, c_occ);
    s.district = need_text(row, c_district, "district");
    s.wage_nominal = need_double(row, c_wage, "wage");
    if (!(s.wage_nominal > 0.0)) throw RowReject{"wage must be positive"};
    s.age = static_cast<int>(need_int(row, c_age, "age"));
    if (s.age < 14 || s.age > 100) throw RowReject{"age outside [14, 100]"};
    s.education = parse_education(need_text(row, c_edu, "education"));
    s.gender = parse_gender(need_text(row, c_gender, "gender"));
    s.nationality = parse_nationality(need_text(row, c_nat, "nationality"));
    auto east = csv::parse_bool(field(row, c_east));
    if (!east) throw RowReject{"bad or missing east flag"};
    s.east = *east;
    s.industry = static_cast<int>(need_int(row, c_ind, "industry"));
    if (c_weight && !csv::is_missing(field(row, *c_weight))) {
      s.weight = need_double(row, *c_weight, "weight");
      if (s.weight < 0.0) throw RowReject{"weight must be nonnegative"};
    }
    const auto& cens = field(row, c_cens);
    if (csv::is_missing(cens)) {
      auto lim = config.censor_limits.find(s.year);
      s.censored = lim != config.censor_limits.end() && s.wage_nominal >= lim->second;
    } else {
      auto b = csv::parse_bool(cens);
      if (!b) throw RowReject{"bad censored flag"};
      s.censored = *b;
    }
    if (!seen.emplace(s.worker_id, s.year).second)
      duplicate(name, line, "(" + s.worker_id + ", " + std::to_string(s.year) + ")");
    out.push_back(std::move(s));
  });
  return out;
}

std::vector<VacancyRecord> parse_vacancies(const csv::Table& t, LoadDiagnostics& diag) {
  const std::string name = "vacancies";
  const auto c_occ = t.require_column("occupation", name);
  const auto c_district = t.require_column("district", name);
  const auto c_year = t.require_column("year", name);
  const auto c_v = t.require_column("v_registered", name);
  std::vector<VacancyRecord> out;
  std::set<std::tuple<std::string, std::string, int>> seen;
  for_each_row(t, name, diag, [&](const std::vector<std::string>& row, std::size_t line) {
    VacancyRecord r;
    r.occupation = need_occupation(row, c_occ);
    r.district = need_text(row, c_district, "district");
    r.year = static_cast<int>(need_int(row, c_year, "year"));
    r.v_registered = need_int(row, c_v, "v_registered");
    if (r.v_registered < 0) throw RowReject{"v_registered must be nonnegative"};
    if (!seen.emplace(r.occupation, r.district, r.year).second)
      duplicate(name, line, r.occupation + "/" + r.district + "/" + std::to_string(r.year));
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<JobSeekerRecord> parse_seekers(const csv::Table& t, LoadDiagnostics& diag) {
  const std::string name = "seekers";
  const auto c_occ = t.require_column("occupation", name);
  const auto c_district = t.require_column("district", name);
  const auto c_year = t.require_column("year", name);
  const auto c_u = t.require_column("u", name);
  std::vector<JobSeekerRecord> out;
  std::set<std::tuple<std::string, std::string, int>> seen;
  for_each_row(t, name, diag, [&](const std::vector<std::string>& row, std::size_t line) {
    JobSeekerRecord r;
    r.occupation = need_occupation(row, c_occ);
    r.district = need_text(row, c_district, "district");
    r.year = static_cast<int>(need_int(row, c_year, "year"));
    r.u = need_int(row, c_u, "u");
    if (r.u < 0) throw RowReject{"u must be nonnegative"};
    if (!seen.emplace(r.occupation, r.district, r.year).second)
      duplicate(name, line, r.occupation + "/" + r.district + "/" + std::to_string(r.year));
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<NotificationShare> parse_shares(const csv::Table& t, LoadDiagnostics& diag) {
  const std::string name = "shares";
  const auto c_year = t.require_column("year", name);
  const auto c_group = t.require_column("requirement_group", name);
  const auto c_share = t.require_column("share", name);
  std::vector<NotificationShare> out;
  std::set<std::pair<int, RequirementGroup>> seen;
  for_each_row(t, name, diag, [&](const std::vector<std::string>& row, std::size_t line) {
    NotificationShare s;
    s.year = static_cast<int>(need_int(row, c_year, "year"));
    s.group = parse_requirement_group(need_text(row, c_group, "requirement_group"));
    s.share = need_double(row, c_share, "share");
    if (!(s.share > 0.0 && s.share <= 1.0)) throw RowReject{"share must lie in (0, 1]"};
    if (!seen.emplace(s.year, s.group).second)
      duplicate(name, line, std::to_string(s.year) + "/" + std::string(to_string(s.group)));
    out.push_back(s);
  });
  return out;
}

CpiSeries parse_cpi(const csv::Table& t, LoadDiagnostics& diag) {
  const std::string name = "cpi";
  const auto c_year = t.require_column("year", name);
  const auto c_index = t.require_column("index", name);
  std::map<int, double> idx;
  for_each_row(t, name, diag, [&](const std::vector<std::string>& row, std::size_t line) {
    int y = static_cast<int>(need_int(row, c_year, "year"));
    double v = need_double(row, c_index, "index");
    if (!(v > 0.0)) throw RowReject{"index must be positive"};
    if (!idx.emplace(y, v).second) duplicate(name, line, std::to_string(y));
  });
  return CpiSeries(std::move(idx));
}

std::vector<CommutingFlow> parse_flows(const csv::Table& t, LoadDiagnostics& diag) {
  const std::string name = "flows";
  const auto c_o = t.require_column("origin_district", name);
  const auto c_d = t.require_column("destination_district", name);
  const auto c_n = t.require_column("commuters", name);
  std::vector<CommutingFlow> out;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_row(t, name, diag, [&](const std::vector<std::string>& row, std::size_t line) {
    CommutingFlow f;
    f.origin = need_text(row, c_o, "origin_district");
    f.destination = need_text(row, c_d, "destination_district");
    f.commuters = need_double(row, c_n, "commuters");
    if (f.commuters < 0.0) throw RowReject{"commuters must be nonnegative"};
    if (!seen.emplace(f.origin, f.destination).second)
      duplicate(name, line, f.origin + "->" + f.destination);
    out.push_back(std::move(f));
  });
  return out;
}

std::vector<Adjacency> parse_adjacency(const csv::Table& t, LoadDiagnostics& diag) {
  const std::string name = "adjacency";
  const auto c_a = t.require_column("district_a", name);
  const auto c_b = t.require_column("district_b", name);
  std::vector<Adjacency> out;
  for_each_row(t, name, diag, [&](const std::vector<std::string>& row, std::size_t) {
    out.push_back({need_text(row, c_a, "district_a"), need_text(row, c_b, "district_b")});
  });
  return out;
}

std::map<int, double> parse_limits(const csv::Table& t) {
  const auto c_year = t.require_column("year", "limits");
  const auto c_limit = t.require_column("limit", "limits");
  std::map<int, double> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto y = csv::parse_int(field(t.rows[i], c_year));
    auto v = csv::parse_double(field(t.rows[i], c_limit));
    if (!y || !v || !(*v > 0.0))
      throw ValidationError("limits line " + std::to_string(t.line_numbers[i]) +
                            ": malformed row");
    if (!out.emplace(static_cast<int>(*y), *v).second)
      throw ValidationError("limits line " + std::to_string(t.line_numbers[i]) +
                            ": duplicate year");
  }
  return out;
}

TableBundle load_tables(const TablePaths& paths, const PanelConfig& config) {
  config.validate();
  TableBundle b;
  auto& d = b.diagnostics;
  if (paths.spells) b.spells = parse_spells(csv::read(*paths.spells), config, d);
  if (paths.vacancies) b.vacancies = parse_vacancies(csv::read(*paths.vacancies), d);
  if (paths.seekers) b.seekers = parse_seekers(csv::read(*paths.seekers), d);
  if (paths.shares) b.shares = parse_shares(csv::read(*paths.shares), d);
  if (paths.cpi) {
    b.cpi = parse_cpi(csv::read(*paths.cpi), d);
    b.cpi->check_base(config.base_year);
  }
  if (paths.flows) b.flows = parse_flows(csv::read(*paths.flows), d);
  if (paths.adjacency) b.adjacency = parse_adjacency(csv::read(*paths.adjacency), d);
  return b;
}

csv::Table spells_to_table(const std::vector<WorkerSpell>& spells) {
  csv::Table t;
  t.header = {"worker_id", "year", "firm_id",   "occupation",  "district", "wage",     "censored",
              "age",       "education", "gender", "nationality", "east",   "industry", "weight"};
  for (const auto& s : spells) {
    t.rows.push_back({s.worker_id, std::to_string(s.year), s.firm_id, s.occupation, s.district,
                      csv::format_double(s.wage_nominal), s.censored ? "1" : "0",
                      std::to_string(s.age), std::string(to_string(s.education)),
                      std::string(to_string(s.gender)), std::string(to_string(s.nationality)),
                      s.east ? "1" : "0", std::to_string(s.industry),
                      csv::format_double(s.weight)});
  }
  return t;
}

csv::Table vacancies_to_table(const std::vector<VacancyRecord>& v) {
  csv::Table t;
  t.header = {"occupation", "district", "year", "v_registered"};
  for (const auto& r : v)
    t.rows.push_back({r.occupation, r.district, std::to_string(r.year),
                      std::to_string(r.v_registered)});
  return t;
}

csv::Table seekers_to_table(const std::vector<JobSeekerRecord>& u) {
  csv::Table t;
  t.header = {"occupation", "district", "year", "u"};
  for (const auto& r : u)
    t.rows.push_back({r.occupation, r.district, std::to_string(r.year), std::to_string(r.u)});
  return t;
}

csv::Table shares_to_table(const std::vector<NotificationShare>& s) {
  csv::Table t;
  t.header = {"year", "requirement_group", "share"};
  for (const auto& r : s)
    t.rows.push_back(
        {std::to_string(r.year), std::string(to_string(r.group)), csv::format_double(r.share)});
  return t;
}

csv::Table cpi_to_table(const CpiSeries& cpi) {
  csv::Table t;
  t.header = {"year", "index"};
  for (const auto& [y, v] : cpi.values())
    t.rows.push_back({std::to_string(y), csv::format_double(v)});
  return t;
}

csv::Table flows_to_table(const std::vector<CommutingFlow>& f) {
  csv::Table t;
  t.header = {"origin_district", "destination_district", "commuters"};
  for (const auto& r : f)
    t.rows.push_back({r.origin, r.destination, csv::format_double(r.commuters)});
  return t;
}

csv::Table adjacency_to_table(const std::vector<Adjacency>& a) {
  csv::Table t;
  t.header = {"district_a", "district_b"};
  for (const auto& r : a) t.rows.push_back({r.a, r.b});
  return t;
}

std::vector<WorkerSpell> derive_hires(std::vector<WorkerSpell> spells) {
  std::set<std::tuple<std::string_view, int, std::string_view>> employed;
  for (const auto& s : spells) employed.emplace(s.worker_id, s.year, s.firm_id);
  for (auto& s : spells)
    s.hire = employed.count({s.worker_id, s.year - 1, s.firm_id}) == 0;
  return spells;
}

std::vector<WorkerSpell> deflate(std::vector<WorkerSpell> spells, const CpiSeries& cpi,
                                 int base_year) {
  if (!cpi.contains(base_year))
    throw ValidationError("cpi base year " + std::to_string(base_year) + " missing");
  for (auto& s : spells) s.wage_real = s.wage_nominal * 100.0 / cpi.at(s.year);
  return spells;
}

}  // namespace lmt
