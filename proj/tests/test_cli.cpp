#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cli_pipeline.hpp"
#include "json.hpp"
#include "lmt/commands.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("lmt_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("usage errors and version") {
  auto dir = scratch("usage");
  const auto log = dir / "log.txt";
  CHECK(pipeline::run("--version", log) == 0);
  CHECK(pipeline::run("", log) == lmt::commands::kUsage);
  CHECK(pipeline::run("estimate --out x.json", log) == lmt::commands::kUsage);
  CHECK(pipeline::run("frobnicate", log) == lmt::commands::kUsage);
}

TEST_CASE("validation and io errors map to exit codes") {
  auto dir = scratch("errors");
  const auto log = dir / "log.txt";
  pipeline::write_text(dir / "bad.toml", "[run]\nunknown_key = 1\n");
  CHECK(pipeline::run("simulate --config " + (dir / "bad.toml").string() + " --out-dir " +
                          (dir / "sim").string(),
                      log) == lmt::commands::kValidation);
  pipeline::write_text(dir / "panel.csv", "y,x,c\n1,2,1\n");
  pipeline::write_text(dir / "spec.toml", "outcome = \"y\"\nexogenous = [\"x\"]\ncluster = \"c\"\n");
  CHECK(pipeline::run("estimate --panel " + (dir / "panel.csv").string() + " --spec " +
                          (dir / "spec.toml").string() + " --out " +
                          (dir / "no_such_dir" / "r.json").string(),
                      log) != 0);
  pipeline::write_text(dir / "panel2.csv", "y,x,c\n1,2,1\n2,3,1\n3,5,2\n4,4,2\n");
  CHECK(pipeline::run("estimate --panel " + (dir / "panel2.csv").string() + " --spec " +
                          (dir / "spec.toml").string() + " --out " + (dir / "r.json").string(),
                      log) == 0);
  pipeline::write_text(dir / "panel3.csv", "y,x,c\n1,1,1\n2,1,1\n3,1,2\n4,1,2\n");
  CHECK(pipeline::run("estimate --panel " + (dir / "panel3.csv").string() + " --spec " +
                          (dir / "spec.toml").string() + " --out " + (dir / "r3.json").string(),
                      log) == lmt::commands::kEstimation);
}

TEST_CASE("every subcommand runs and writes a manifest") {
  auto dir = scratch("pipeline");
  pipeline::write_inputs(dir);
  for (const auto& s : pipeline::run_all(dir)) {
    INFO(s.name);
    CHECK(s.status == 0);
  }
  for (const char* f : {"sim/manifest.json", "partition.csv.manifest.json",
                        "cells.csv.manifest.json", "imputed.csv.manifest.json",
                        "panel.csv.manifest.json", "result.json.manifest.json",
                        "report.json.manifest.json"}) {
    INFO(f);
    REQUIRE(fs::exists(dir / f));
    auto m = nlohmann::json::parse(pipeline::read_text(dir / f));
    CHECK(m["tool_version"] == "1.0.0");
    CHECK(m["config_hash"].get<std::string>().size() == 64);
    CHECK(m["outputs"].size() >= 1);
  }

  auto partition = lmt::csv::read(dir / "partition.csv");
  CHECK(partition.size() == 8);
  CHECK(partition.rows[0][1] == partition.rows[3][1]);
  CHECK(partition.rows[0][1] != partition.rows[4][1]);

  auto imputed = lmt::csv::read(dir / "imputed.csv");
  const auto status = imputed.require_column("imputation", "imputed");
  std::size_t n_imputed = 0;
  for (const auto& row : imputed.rows) n_imputed += row[status] == "imputed";
  CHECK(n_imputed > 0);

  auto result = nlohmann::json::parse(pipeline::read_text(dir / "result.json"));
  CHECK(result["method"] == "2sls");
  CHECK(result["coefficients"][0]["name"] == "log_theta");
  CHECK(std::isfinite(result["coefficients"][0]["se"].get<double>()));
  CHECK(result["fe_dims"].size() == 4);

  auto report = nlohmann::json::parse(pipeline::read_text(dir / "report.json"));
  CHECK(report["bounds"][1]["share_pct"].get<double>() == doctest::Approx(19.067).epsilon(1e-3));
  CHECK(fs::exists(dir / "report.json.bins.csv"));
}

TEST_CASE("flag overrides take precedence over the config file") {
  auto dir = scratch("override");
  pipeline::write_inputs(dir);
  const auto log = dir / "log.txt";
  const std::string cfg = "--config " + (dir / "config.toml").string();
  CHECK(pipeline::run("simulate " + cfg + " --seed 9 --out-dir " + (dir / "a").string(), log) == 0);
  auto truth = nlohmann::json::parse(pipeline::read_text(dir / "a" / "truth.json"));
  CHECK(truth["seed"] == 9);
  CHECK(truth["config"]["occupations"] == 16);
  CHECK(pipeline::run("simulate " + cfg + " --out-dir " + (dir / "b").string(), log) == 0);
  CHECK(pipeline::read_text(dir / "a" / "spells.csv") != pipeline::read_text(dir / "b" / "spells.csv"));
}
