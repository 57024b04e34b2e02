#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lmt/config.hpp"
#include "lmt/manifest.hpp"

using namespace lmt;
using namespace lmt::config;

TEST_CASE("defaults, file, then flags") {
  auto d = defaults();
  CHECK(d.run.seed == 1);
  CHECK(d.run.threads == 1);
  CHECK(d.zones_grid == "0.02:0.20:0.01");

  auto c = parse(R"(
[run]
seed = 42
threads = 3
[zones]
grid = "0.05,0.1"
[synth]
occupations = 20
rho = 0.5
)");
  CHECK(c.run.seed == 42);
  CHECK(c.synth.seed == 42);
  CHECK(c.run.threads == 3);
  CHECK(c.zones_grid == "0.05,0.1");
  CHECK(c.synth.occupations == 20);
  CHECK(c.synth.rho == 0.5);
  CHECK(c.synth.regions == d.synth.regions);

  apply(c, Overrides{7, std::nullopt, std::string("debug")});
  CHECK(c.run.seed == 7);
  CHECK(c.synth.seed == 7);
  CHECK(c.run.threads == 3);
  CHECK(c.run.log_level == "debug");
  CHECK(c.spec.demean.threads == 3);
}

TEST_CASE("unknown keys and bad types are rejected") {
  CHECK_THROWS_AS(parse("[run]\nseeds = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse("[nope]\nx = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse("[run]\nthreads = \"two\"\n"), ValidationError);
  CHECK_THROWS_AS(parse("[panel]\ntrim = [5]\n"), ValidationError);
  CHECK_THROWS_AS(parse("[run\n"), ValidationError);
}

TEST_CASE("panel settings") {
  auto c = parse(R"(
[panel]
occupation_digits = 2
trim = [1.0, 99.0]
[panel.censor_limits]
2012 = 190.5
)");
  CHECK(c.panel.occupation_digits == 2);
  REQUIRE(c.panel.trim);
  CHECK(c.panel.trim->upper_pct == 99.0);
  CHECK(c.panel.censor_limits.at(2012) == 190.5);
}

TEST_CASE("regression spec files") {
  auto s = parse_spec(R"(
outcome = "log_wage"
endogenous = ["log_theta"]
instruments = ["z1"]
exogenous = ["age_sq"]
fe = ["worker_id", "year", "market", "firm_id"]
cluster = "market"
trim = [5.0, 95.0]
demean_method = "map"
)");
  CHECK(s.outcome == "log_wage");
  CHECK(s.fe.size() == 4);
  CHECK(s.demean.method == estimator::DemeanMethod::map);
  REQUIRE(s.trim);
  auto again = parse_spec("[estimate]\noutcome = \"y\"\nexogenous = [\"x\"]\ncluster = \"c\"\n");
  CHECK(again.exogenous == std::vector<std::string>{"x"});
  CHECK_THROWS_AS(parse_spec("outcome = \"y\"\nbogus = 1\n"), ValidationError);
  CHECK(spec_to_json(s)["cluster"] == "market");
}

TEST_CASE("effective config serializes deterministically") {
  auto a = defaults().to_json().dump();
  auto b = defaults().to_json().dump();
  CHECK(a == b);
  CHECK(manifest::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
