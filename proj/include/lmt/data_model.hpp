#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lmt/csv.hpp"

namespace lmt {

enum class Education { low, medium, high };
enum class Gender { male, female };
enum class Nationality { native, foreign };
enum class RequirementGroup { helpers, professionals, specialists_experts };
enum class RegionScheme { zones, states, government_regions, districts };

std::string_view to_string(Education e);
std::string_view to_string(Gender g);
std::string_view to_string(Nationality n);
std::string_view to_string(RequirementGroup g);
std::string_view to_string(RegionScheme s);

// Unknown values throw ValidationError.
Education parse_education(std::string_view s);
Gender parse_gender(std::string_view s);
Nationality parse_nationality(std::string_view s);
RequirementGroup parse_requirement_group(std::string_view s);
RegionScheme parse_region_scheme(std::string_view s);

// Requirement level is the fifth digit of a 5-digit occupation code.
// 1 -> helpers, 2 -> professionals, 3 and 4 -> specialists_experts.
int requirement_level(std::string_view occupation);
RequirementGroup requirement_group(int level);

// Leading `digits` digits plus "-" plus the requirement digit, e.g.
// ("26342", 3) -> "263-2". Throws ValidationError on a malformed code.
std::string market_occupation_key(std::string_view occupation, int digits);
bool is_valid_occupation(std::string_view occupation);

// One worker-year employment record (the spell covering June 30).
struct WorkerSpell {
  std::string worker_id;
  int year = 0;
  std::string firm_id;
  std::string occupation;
  std::string district;
  double wage_nominal = 0.0;  // EUR/day
  bool censored = false;
  int age = 0;
  Education education = Education::medium;
  Gender gender = Gender::male;
  Nationality nationality = Nationality::native;
  bool east = false;
  int industry = 0;
  double weight = 1.0;

  std::optional<double> wage_real;
  bool hire = false;

  int requirement() const { return requirement_level(occupation); }
  bool operator==(const WorkerSpell&) const = default;
};

struct VacancyRecord {
  std::string occupation;
  std::string district;
  int year = 0;
  std::int64_t v_registered = 0;
  bool operator==(const VacancyRecord&) const = default;
};

struct JobSeekerRecord {
  std::string occupation;
  std::string district;
  int year = 0;
  std::int64_t u = 0;
  bool operator==(const JobSeekerRecord&) const = default;
};

struct NotificationShare {
  int year = 0;
  RequirementGroup group = RequirementGroup::helpers;
  double share = 1.0;  // fraction in (0, 1]
  bool operator==(const NotificationShare&) const = default;
};

struct CommutingFlow {
  std::string origin;
  std::string destination;
  double commuters = 0.0;
  bool operator==(const CommutingFlow&) const = default;
};

struct Adjacency {
  std::string a;
  std::string b;
  bool operator==(const Adjacency&) const = default;
};

// Consumer price index by year.
class CpiSeries {
 public:
  CpiSeries() = default;
  explicit CpiSeries(std::map<int, double> index);

  double at(int year) const;
  bool contains(int year) const { return index_.count(year) > 0; }
  const std::map<int, double>& values() const { return index_; }
  // Base year must be present with value 100.
  void check_base(int base_year) const;

  bool operator==(const CpiSeries&) const = default;

 private:
  std::map<int, double> index_;
};

struct TrimRule {
  double lower_pct = 5.0;
  double upper_pct = 95.0;
  bool operator==(const TrimRule&) const = default;
};

struct PanelConfig {
  int occupation_digits = 3;
  RegionScheme region_scheme = RegionScheme::zones;
  int base_year = 2012;
  std::map<int, double> censor_limits;  // year -> EUR/day
  std::optional<TrimRule> trim;
  int first_year = 2012;
  int last_year = 2022;

  void validate() const;
};

struct RejectedRow {
  std::string table;
  std::size_t line = 0;
  std::string reason;
};

struct LoadDiagnostics {
  std::map<std::string, std::size_t> rows_read;
  std::map<std::string, std::size_t> rows_accepted;
  std::vector<RejectedRow> rejected;
};

struct TablePaths {
  std::optional<std::filesystem::path> spells, vacancies, seekers, shares, cpi, flows, adjacency;
};

struct TableBundle {
  std::vector<WorkerSpell> spells;
  std::vector<VacancyRecord> vacancies;
  std::vector<JobSeekerRecord> seekers;
  std::vector<NotificationShare> shares;
  std::optional<CpiSeries> cpi;
  std::vector<CommutingFlow> flows;
  std::vector<Adjacency> adjacency;
  LoadDiagnostics diagnostics;
};

// Malformed rows are rejected with their line number and recorded in the
// diagnostics; duplicate keys and unknown enum values throw ValidationError.
TableBundle load_tables(const TablePaths& paths, const PanelConfig& config);

std::vector<WorkerSpell> parse_spells(const csv::Table& t, const PanelConfig& config,
                                      LoadDiagnostics& diag);
std::vector<VacancyRecord> parse_vacancies(const csv::Table& t, LoadDiagnostics& diag);
std::vector<JobSeekerRecord> parse_seekers(const csv::Table& t, LoadDiagnostics& diag);
std::vector<NotificationShare> parse_shares(const csv::Table& t, LoadDiagnostics& diag);
CpiSeries parse_cpi(const csv::Table& t, LoadDiagnostics& diag);
std::vector<CommutingFlow> parse_flows(const csv::Table& t, LoadDiagnostics& diag);
std::vector<Adjacency> parse_adjacency(const csv::Table& t, LoadDiagnostics& diag);
std::map<int, double> parse_limits(const csv::Table& t);

csv::Table spells_to_table(const std::vector<WorkerSpell>& spells);
csv::Table vacancies_to_table(const std::vector<VacancyRecord>& v);
csv::Table seekers_to_table(const std::vector<JobSeekerRecord>& u);
csv::Table shares_to_table(const std::vector<NotificationShare>& s);
csv::Table cpi_to_table(const CpiSeries& cpi);
csv::Table flows_to_table(const std::vector<CommutingFlow>& f);
csv::Table adjacency_to_table(const std::vector<Adjacency>& a);

// hire(i, t) is true iff worker i has no spell at the same firm in t - 1.
std::vector<WorkerSpell> derive_hires(std::vector<WorkerSpell> spells);

// wage_real = wage_nominal * 100 / cpi(year). Missing year throws.
std::vector<WorkerSpell> deflate(std::vector<WorkerSpell> spells, const CpiSeries& cpi,
                                 int base_year);

}  // namespace lmt
