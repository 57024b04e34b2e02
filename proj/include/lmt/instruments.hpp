#pragma once

#include <span>
#include <string>
#include <vector>

#include "lmt/csv.hpp"
#include "lmt/tightness.hpp"

namespace lmt::instruments {

enum class Measure { baseline, flow_adjusted };
Measure parse_measure(std::string_view s);

// Leave-one-out statistics for one (occupation, region, year) cell. NaN
// marks an undefined value.
struct InstrumentRow {
  double z1 = kNaN;             // mean of ln theta over other regions
  double z2 = kNaN;             // ln of summed V over summed U in other regions
  double loo_log_v_sum = kNaN;  // ln of summed V in other regions
};

// Aligned with `cells`. Regions are grouped by (occupation, year); every
// statistic for region r is accumulated from prefix and suffix sums that
// exclude r, so no count of region r is ever read.
std::vector<InstrumentRow> build(const std::vector<tightness::MarketCell>& cells,
                                 Measure measure = Measure::baseline);

std::vector<double> z1(const std::vector<tightness::MarketCell>& cells,
                       Measure measure = Measure::baseline);
std::vector<double> z2(const std::vector<tightness::MarketCell>& cells,
                       Measure measure = Measure::baseline);
std::vector<double> loo_vacancy_sum(const std::vector<tightness::MarketCell>& cells,
                                    Measure measure = Measure::baseline);

struct Interacted {
  std::vector<std::string> levels;  // one per column, in column order
  std::vector<std::vector<double>> columns;
  std::vector<std::string> warnings;
};

// column s = value * 1{group == levels[s]}. With `levels` empty the
// observed distinct groups are used in sorted order; declared levels that
// never occur are dropped with a warning.
Interacted interact(std::span<const double> values, std::span<const std::string> groups,
                    std::vector<std::string> levels = {});

// Appends z1, z2 and loo_log_v_sum columns to a cells table.
csv::Table append_to_table(csv::Table cells_table, const std::vector<InstrumentRow>& rows);

}  // namespace lmt::instruments
