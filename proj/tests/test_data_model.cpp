#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "lmt/common.hpp"
#include "lmt/csv.hpp"
#include "lmt/data_model.hpp"

using namespace lmt;

namespace {

const char* kSpellHeader =
    "worker_id,year,firm_id,occupation,district,wage,censored,age,education,gender,nationality,"
    "east,industry\n";

}  // namespace

TEST_CASE("csv sniffs the delimiter and round-trips") {
  auto t = csv::parse("a\tb\n1\t2\n\n3\t4\n");
  CHECK(t.delimiter == '\t');
  REQUIRE(t.size() == 2);
  CHECK(t.rows[1][1] == "4");
  CHECK(t.line_numbers[1] == 4);
  auto again = csv::parse(csv::to_string(t));
  CHECK(again.header == t.header);
  CHECK(again.rows == t.rows);
}

TEST_CASE("csv number formatting round-trips and marks missing") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.125})
    CHECK(*csv::parse_double(csv::format_double(v)) == v);
  CHECK(csv::format_double(NAN) == "NA");
  CHECK(csv::is_missing("NA"));
  CHECK(csv::is_missing(""));
  CHECK_FALSE(csv::parse_double("abc"));
  CHECK(*csv::parse_bool("1"));
  CHECK_FALSE(*csv::parse_bool("false"));
}

TEST_CASE("occupation keys and requirement groups") {
  CHECK(market_occupation_key("26342", 3) == "263-2");
  CHECK(market_occupation_key("26342", 2) == "26-2");
  CHECK(requirement_level("26344") == 4);
  CHECK(requirement_group(1) == RequirementGroup::helpers);
  CHECK(requirement_group(2) == RequirementGroup::professionals);
  CHECK(requirement_group(3) == RequirementGroup::specialists_experts);
  CHECK(requirement_group(4) == RequirementGroup::specialists_experts);
  CHECK_THROWS_AS(market_occupation_key("2634", 3), ValidationError);
  CHECK_THROWS_AS(market_occupation_key("26345", 3), ValidationError);
  CHECK_FALSE(is_valid_occupation("2634x"));
}

TEST_CASE("enum parsing rejects unknown values") {
  CHECK(parse_education("high") == Education::high);
  CHECK(parse_gender("female") == Gender::female);
  CHECK_THROWS_AS(parse_education("phd"), ValidationError);
  CHECK(parse_region_scheme("districts") == RegionScheme::districts);
}

TEST_CASE("spells: malformed rows are rejected with line numbers") {
  std::string text = kSpellHeader;
  text += "w1,2012,f1,26342,01001,100,0,30,medium,male,native,0,1\n";
  text += "w2,2012,f1,26342,01001,-5,0,30,medium,male,native,0,1\n";
  text += "w3,2012,f1,2634,01001,100,0,30,medium,male,native,0,1\n";
  text += "w4,2012,f1,26342,01001,100,0,30,medium,male,native,0\n";
  LoadDiagnostics diag;
  auto spells = parse_spells(csv::parse(text), PanelConfig{}, diag);
  CHECK(spells.size() == 1);
  REQUIRE(diag.rejected.size() == 3);
  CHECK(diag.rejected[0].line == 3);
  CHECK(diag.rejected[1].line == 4);
  CHECK(diag.rejected[2].line == 5);
  CHECK(diag.rows_read["spells"] == 4);
  CHECK(diag.rows_accepted["spells"] == 1);
}

TEST_CASE("spells: duplicates and unknown enums are hard errors") {
  std::string dup = kSpellHeader;
  dup += "w1,2012,f1,26342,01001,100,0,30,medium,male,native,0,1\n";
  dup += "w1,2012,f2,26342,01001,100,0,30,medium,male,native,0,1\n";
  LoadDiagnostics diag;
  CHECK_THROWS_AS(parse_spells(csv::parse(dup), PanelConfig{}, diag), ValidationError);
  std::string bad = kSpellHeader;
  bad += "w1,2012,f1,26342,01001,100,0,30,medium,other,native,0,1\n";
  CHECK_THROWS_AS(parse_spells(csv::parse(bad), PanelConfig{}, diag), ValidationError);
}

TEST_CASE("spells: censoring flag derived from the limit when missing") {
  std::string text = kSpellHeader;
  text += "w1,2012,f1,26342,01001,190,NA,30,medium,male,native,0,1\n";
  text += "w2,2012,f1,26342,01001,189.99,NA,30,medium,male,native,0,1\n";
  PanelConfig cfg;
  cfg.censor_limits[2012] = 190.0;
  LoadDiagnostics diag;
  auto spells = parse_spells(csv::parse(text), cfg, diag);
  REQUIRE(spells.size() == 2);
  CHECK(spells[0].censored);
  CHECK_FALSE(spells[1].censored);
}

TEST_CASE("spells table round-trip") {
  std::string text = kSpellHeader;
  text += "w1,2012,f1,26342,01001,100.5,0,30,medium,male,native,0,1\n";
  text += "w1,2013,f2,26342,01001,101.25,1,31,high,female,foreign,1,7\n";
  LoadDiagnostics diag;
  auto spells = parse_spells(csv::parse(text), PanelConfig{}, diag);
  auto again = parse_spells(csv::parse(csv::to_string(spells_to_table(spells))), PanelConfig{}, diag);
  CHECK(again == spells);
}

TEST_CASE("hires: no spell at the same firm in the previous year") {
  std::vector<WorkerSpell> s(4);
  s[0].worker_id = "a"; s[0].year = 2012; s[0].firm_id = "f";
  s[1].worker_id = "a"; s[1].year = 2013; s[1].firm_id = "f";
  s[2].worker_id = "a"; s[2].year = 2014; s[2].firm_id = "g";
  s[3].worker_id = "a"; s[3].year = 2016; s[3].firm_id = "g";
  auto h = derive_hires(s);
  CHECK(h[0].hire);
  CHECK_FALSE(h[1].hire);
  CHECK(h[2].hire);
  CHECK(h[3].hire);
}

TEST_CASE("deflation to base-year prices") {
  CpiSeries cpi({{2012, 100.0}, {2013, 125.0}});
  std::vector<WorkerSpell> s(2);
  s[0].year = 2012; s[0].wage_nominal = 80.0;
  s[1].year = 2013; s[1].wage_nominal = 150.0;
  auto d = deflate(s, cpi, 2012);
  CHECK(*d[0].wage_real == doctest::Approx(80.0));
  CHECK(*d[1].wage_real == doctest::Approx(120.0));
  s[1].year = 2014;
  CHECK_THROWS_AS(deflate(s, cpi, 2012), ValidationError);
  CHECK_THROWS_AS(deflate(s, CpiSeries({{2012, 90.0}}), 2012), ValidationError);
}

TEST_CASE("panel config validation") {
  PanelConfig c;
  c.occupation_digits = 5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.occupation_digits = 3;
  c.trim = TrimRule{60.0, 95.0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
}
