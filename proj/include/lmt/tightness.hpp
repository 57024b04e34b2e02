#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lmt/common.hpp"
#include "lmt/csv.hpp"
#include "lmt/data_model.hpp"

namespace lmt::tightness {

enum class ShareMode {
  yearly,          // year-specific shares, pooled row as fallback when present
  pooled,          // one time-constant share per requirement group
  registered_only  // no extrapolation (share = 1)
};
ShareMode parse_share_mode(std::string_view s);
std::string_view to_string(ShareMode m);

// Notification shares by (year, requirement group). Rows with year 0 form
// the pooled, time-constant table; without them the pooled share of a group
// is the mean over its years.
class ShareTable {
 public:
  ShareTable() = default;
  explicit ShareTable(const std::vector<NotificationShare>& shares,
                      ShareMode mode = ShareMode::yearly);

  double lookup(int year, RequirementGroup group) const;
  ShareMode mode() const { return mode_; }

 private:
  ShareMode mode_ = ShareMode::yearly;
  std::map<std::pair<int, RequirementGroup>, double> yearly_;
  std::map<RequirementGroup, double> pooled_;
};

// v_registered / share; share must lie in (0, 1].
double extrapolate_vacancies(double v_registered, double share);
double extrapolate_vacancies(double v_registered, const ShareTable& shares, int requirement_digit,
                             int year);

// Maps districts onto the configured regional unit.
class RegionMap {
 public:
  // zones: lookup in the partition; districts: identity; states and
  // government_regions: leading 2 and 3 characters of the district code.
  RegionMap(RegionScheme scheme, std::map<std::string, std::string> zone_map = {});
  std::string region_of(const std::string& district) const;
  RegionScheme scheme() const { return scheme_; }

 private:
  RegionScheme scheme_;
  std::map<std::string, std::string> zone_map_;
};

enum class CellFlag { ok, no_seekers, no_vacancies };
std::string_view to_string(CellFlag f);

struct CellKey {
  std::string occupation;  // market occupation key, e.g. "263-2"
  std::string region;
  int year = 0;
  auto operator<=>(const CellKey&) const = default;
};

struct MarketCell {
  CellKey key;
  std::int64_t v_registered = 0;
  double v_total = 0.0;
  std::int64_t u = 0;
  double theta = kNaN;   // v_total / u, undefined unless both > 0
  double v_flow = kNaN;  // flow-adjusted vacancies
  double u_flow = kNaN;  // flow-adjusted seekers
  double theta_flow = kNaN;
  CellFlag flag = CellFlag::ok;
  bool flow_fallback = false;  // flow weights unavailable for this occupation

  bool theta_defined() const { return flag == CellFlag::ok; }
};

struct CellOptions {
  int occupation_digits = 3;
};

// Extrapolates at the 5-digit level, then aggregates to (occupation key,
// region, year). Output is sorted by key.
std::vector<MarketCell> build_cells(const std::vector<VacancyRecord>& vacancies,
                                    const std::vector<JobSeekerRecord>& seekers,
                                    const ShareTable& shares, const RegionMap& regions,
                                    const CellOptions& options = {});

// Relative value of a job seeker in h for occupation o.
double relative_value(double p_h_given_o, double p_o_given_o, double employment_o,
                      double employment_h);

class FlowWeights {
 public:
  FlowWeights() = default;
  // counts(o, h): year-to-year transitions o -> h, row-major O x O.
  static FlowWeights from_transition_counts(std::vector<std::string> occupations,
                                            const std::vector<double>& counts,
                                            std::vector<double> employment);

  std::size_t size() const { return occupations_.size(); }
  const std::vector<std::string>& occupations() const { return occupations_; }
  std::optional<std::size_t> index_of(const std::string& occupation) const;
  double omega(std::size_t o, std::size_t h) const { return omega_[o * size() + h]; }
  double employment(std::size_t o) const { return employment_[o]; }
  // Occupations with no stayers; their rows are the indicator of o.
  const std::set<std::string>& fallback() const { return fallback_; }

 private:
  std::vector<std::string> occupations_;
  std::map<std::string, std::size_t> index_;
  std::vector<double> omega_;
  std::vector<double> employment_;
  std::set<std::string> fallback_;
};

// Pools consecutive-year transitions of each worker between market
// occupations over [first_year, last_year]; employment is the pooled count
// of spells per occupation in the same years.
FlowWeights transition_weights(const std::vector<WorkerSpell>& spells, int occupation_digits,
                               int first_year, int last_year);

// Adds v_flow, u_flow and theta_flow: weighted sums over all occupations in
// the same (region, year).
std::vector<MarketCell> flow_adjust(std::vector<MarketCell> cells, const FlowWeights& weights);

csv::Table cells_to_table(const std::vector<MarketCell>& cells);
std::vector<MarketCell> cells_from_table(const csv::Table& t);

}  // namespace lmt::tightness
