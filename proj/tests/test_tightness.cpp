#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "lmt/csv.hpp"
#include "lmt/tightness.hpp"

using namespace lmt;
using namespace lmt::tightness;

namespace {

MarketCell cell(std::string occ, std::string region, int year, double v, std::int64_t u) {
  MarketCell c;
  c.key = {std::move(occ), std::move(region), year};
  c.v_registered = static_cast<std::int64_t>(v);
  c.v_total = v;
  c.u = u;
  c.theta = u > 0 && v > 0 ? v / static_cast<double>(u) : kNaN;
  c.flag = u <= 0 ? CellFlag::no_seekers : v > 0 ? CellFlag::ok : CellFlag::no_vacancies;
  return c;
}

}  // namespace

TEST_CASE("vacancy extrapolation") {
  CHECK(extrapolate_vacancies(50.0, 0.5) == doctest::Approx(100.0));
  CHECK(extrapolate_vacancies(36.0, 0.360) == doctest::Approx(100.0));
  CHECK(extrapolate_vacancies(7.0, 1.0) == 7.0);
  CHECK_THROWS_AS(extrapolate_vacancies(7.0, 0.0), ValidationError);
  CHECK_THROWS_AS(extrapolate_vacancies(7.0, 1.2), ValidationError);

  ShareTable yearly({{2012, RequirementGroup::helpers, 0.36}});
  CHECK(extrapolate_vacancies(36.0, yearly, 1, 2012) == doctest::Approx(100.0));
  CHECK_THROWS_AS(extrapolate_vacancies(36.0, yearly, 1, 2013), ValidationError);
  CHECK_THROWS_AS(extrapolate_vacancies(36.0, yearly, 2, 2012), ValidationError);

  ShareTable pooled({{2012, RequirementGroup::helpers, 0.4}, {2013, RequirementGroup::helpers, 0.6}},
                    ShareMode::pooled);
  CHECK(pooled.lookup(2020, RequirementGroup::helpers) == doctest::Approx(0.5));
  ShareTable raw({}, ShareMode::registered_only);
  CHECK(raw.lookup(2020, RequirementGroup::professionals) == 1.0);
}

TEST_CASE("cells aggregate 5-digit codes and flag undefined tightness") {
  std::vector<VacancyRecord> v = {{"26342", "01001", 2012, 10},
                                  {"26312", "01002", 2012, 12},
                                  {"26311", "01003", 2012, 5},
                                  {"11111", "01001", 2012, 0}};
  std::vector<JobSeekerRecord> u = {{"26342", "01001", 2012, 20},
                                    {"26312", "01002", 2012, 30},
                                    {"11111", "01001", 2012, 4}};
  std::vector<NotificationShare> s = {{2012, RequirementGroup::helpers, 0.5},
                                      {2012, RequirementGroup::professionals, 0.5}};
  RegionMap regions(RegionScheme::zones, {{"01001", "A"}, {"01002", "A"}, {"01003", "B"}});
  auto cells = build_cells(v, u, ShareTable(s), regions);
  REQUIRE(cells.size() == 3);
  CHECK(cells[0].key.occupation == "111-1");
  CHECK(cells[0].flag == CellFlag::no_vacancies);
  CHECK(std::isnan(cells[0].theta));
  CHECK(cells[1].key.occupation == "263-1");
  CHECK(cells[1].key.region == "B");
  CHECK(cells[1].flag == CellFlag::no_seekers);
  CHECK(cells[2].key.occupation == "263-2");
  CHECK(cells[2].key.region == "A");
  CHECK(cells[2].v_registered == 22);
  CHECK(cells[2].v_total == doctest::Approx(44.0));
  CHECK(cells[2].u == 50);
  CHECK(cells[2].theta == doctest::Approx(0.88));

  RegionMap missing(RegionScheme::zones, {{"01001", "A"}});
  CHECK_THROWS_AS(build_cells(v, u, ShareTable(s), missing), ValidationError);
}

TEST_CASE("tightness growth between two levels") {
  const double growth = (0.56 / 0.24 - 1.0) * 100.0;
  CHECK(growth == doctest::Approx(133.3).epsilon(0.001));
}

TEST_CASE("relative value of a job seeker") {
  CHECK(relative_value(0.1, 0.5, 100.0, 50.0) == doctest::Approx(0.4));
  CHECK(relative_value(0.5, 0.5, 80.0, 80.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(relative_value(0.1, 0.0, 1.0, 1.0), ValidationError);
}

TEST_CASE("flow-adjusted vacancies of a two-occupation market") {
  // omega(a, b) = (10 / 50) * (100 / 50) = 0.4
  auto w = FlowWeights::from_transition_counts({"a", "b"}, {50, 10, 0, 40}, {100, 50});
  CHECK(w.omega(0, 0) == 1.0);
  CHECK(w.omega(0, 1) == doctest::Approx(0.4));
  CHECK(w.omega(1, 0) == 0.0);
  auto cells = flow_adjust({cell("a", "R", 2012, 10, 20), cell("b", "R", 2012, 5, 10)}, w);
  CHECK(cells[0].v_flow == doctest::Approx(12.0));
  CHECK(cells[0].u_flow == doctest::Approx(24.0));
  CHECK(cells[1].v_flow == doctest::Approx(5.0));
}

TEST_CASE("occupations without stayers fall back to their own cell") {
  auto w = FlowWeights::from_transition_counts({"a", "b"}, {0, 3, 1, 1}, {10, 10});
  CHECK(w.fallback().count("a") == 1);
  auto cells = flow_adjust({cell("a", "R", 2012, 10, 20), cell("b", "R", 2012, 5, 10)}, w);
  CHECK(cells[0].flow_fallback);
  CHECK(cells[0].theta_flow == doctest::Approx(0.5));
}

TEST_CASE("transition weights from spells") {
  std::vector<WorkerSpell> s(4);
  s[0] = {.worker_id = "1", .year = 2012, .occupation = "26342"};
  s[1] = {.worker_id = "1", .year = 2013, .occupation = "11111"};
  s[2] = {.worker_id = "2", .year = 2012, .occupation = "26342"};
  s[3] = {.worker_id = "2", .year = 2013, .occupation = "26342"};
  auto w = transition_weights(s, 3, 2012, 2013);
  REQUIRE(w.size() == 2);
  const auto a = *w.index_of("263-2"), b = *w.index_of("111-1");
  CHECK(w.employment(a) == 3.0);
  CHECK(w.employment(b) == 1.0);
  // (1 / 1) * (3 / 1)
  CHECK(w.omega(a, b) == doctest::Approx(3.0));
  CHECK(w.fallback().count("111-1") == 1);
}

TEST_CASE("cells table round-trip keeps flow columns") {
  auto w = FlowWeights::from_transition_counts({"a", "b"}, {50, 10, 0, 40}, {100, 50});
  auto cells = flow_adjust({cell("a", "R", 2012, 10, 20), cell("b", "R", 2012, 0, 10)}, w);
  auto again = cells_from_table(csv::parse(csv::to_string(cells_to_table(cells))));
  REQUIRE(again.size() == 2);
  CHECK(again[0].v_flow == doctest::Approx(cells[0].v_flow));
  CHECK(again[1].flag == CellFlag::no_vacancies);
  CHECK(std::isnan(again[1].theta));
}

TEST_CASE("region schemes") {
  CHECK(RegionMap(RegionScheme::states).region_of("05315") == "05");
  CHECK(RegionMap(RegionScheme::government_regions).region_of("05315") == "053");
  CHECK(RegionMap(RegionScheme::districts).region_of("05315") == "05315");
}
