#pragma once

// Drives the lmt binary through every subcommand on a small synthetic
// problem. Shared by the CLI unit test and the acceptance run.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lmt/csv.hpp"

namespace pipeline {

namespace fs = std::filesystem;

inline int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(LMT_BINARY) + " " + args + " >>" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Inputs that simulate does not produce: a config, commuting flows with
// adjacency, a spec, an interpretation file and censoring limits.
inline void write_inputs(const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "config.toml", R"([run]
seed = 5
threads = 2
log_level = "warn"

[panel]
first_year = 2012
last_year = 2015

[zones]
grid = "0.02:0.30:0.02"

[synth]
occupations = 16
regions = 5
years = 4
workers_per_market = 8
firms_per_region = 6
)");
  // two blocks of districts on a path, strong flows inside each block
  std::string flows = "origin_district,destination_district,commuters\n";
  std::string adj = "district_a,district_b\n";
  const int n = 8;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const bool same = (i < 4) == (j < 4);
      const int w = i == j ? 40 : same ? 40 + (i * 7 + j * 3) % 11 : 1 + (i + j) % 3;
      flows += "0" + std::to_string(1001 + i) + ",0" + std::to_string(1001 + j) + "," +
               std::to_string(w) + "\n";
    }
    if (i + 1 < n)
      adj += "0" + std::to_string(1001 + i) + ",0" + std::to_string(1002 + i) + "\n";
  }
  write_text(dir / "flows.csv", flows);
  write_text(dir / "adjacency.csv", adj);
  write_text(dir / "spec.toml", R"(outcome = "log_wage"
endogenous = ["log_theta"]
instruments = ["z1"]
exogenous = ["age_sq"]
fe = ["worker_id", "year", "market", "firm_id"]
cluster = "market"
)");
  write_text(dir / "limits.csv", "year,limit\n2012,125\n2013,127\n2014,129\n2015,131\n");
}

// Copy of the simulated spells with the censoring flag left to the limits.
inline void write_censored_spells(const fs::path& sim, const fs::path& out) {
  auto t = lmt::csv::read(sim / "spells.csv");
  const auto c = t.require_column("censored", "spells");
  for (auto& row : t.rows) row[c] = "NA";
  lmt::csv::write(out, t);
}

inline void write_interpretation(const fs::path& dir) {
  write_text(dir / "interpret.toml", "[interpret]\nelasticity_bounds = [0.0044, 0.0113]\n"
                                     "[binscatter]\npanel = \"" +
                                         (dir / "panel.csv").string() +
                                         "\"\nfe = [\"year\"]\nbins = 20\n");
}

struct Step {
  std::string name;
  int status = 0;
};

// Runs every subcommand in dependency order; returns the exit status of each.
inline std::vector<Step> run_all(const fs::path& dir) {
  const auto log = dir / "log.txt";
  const std::string cfg = "--config " + (dir / "config.toml").string();
  const auto sim = dir / "sim";
  std::vector<Step> steps;
  auto step = [&](const std::string& name, const std::string& args) {
    steps.push_back({name, run(name + " " + cfg + " " + args, log)});
  };
  step("simulate", "--out-dir " + sim.string());
  step("delineate-zones", "--flows " + (dir / "flows.csv").string() + " --adjacency " +
                              (dir / "adjacency.csv").string() + " --out " +
                              (dir / "partition.csv").string());
  step("build-tightness",
       "--vacancies " + (sim / "vacancies.csv").string() + " --seekers " +
           (sim / "seekers.csv").string() + " --shares " + (sim / "shares.csv").string() +
           " --zones " + (sim / "zones.csv").string() + " --spells " +
           (sim / "spells.csv").string() + " --out " + (dir / "cells.csv").string());
  if (fs::exists(sim / "spells.csv")) write_censored_spells(sim, dir / "spells_censored.csv");
  step("impute", "--spells " + (dir / "spells_censored.csv").string() + " --limits " +
                     (dir / "limits.csv").string() + " --out " + (dir / "imputed.csv").string());
  step("merge-panel", "--spells " + (sim / "spells.csv").string() + " --cells " +
                          (dir / "cells.csv").string() + " --cpi " + (sim / "cpi.csv").string() +
                          " --zones " + (sim / "zones.csv").string() + " --out " +
                          (dir / "panel.csv").string());
  step("estimate", "--panel " + (dir / "panel.csv").string() + " --spec " +
                       (dir / "spec.toml").string() + " --out " + (dir / "result.json").string() +
                       " --residuals " + (dir / "residuals.csv").string());
  write_interpretation(dir);
  step("report", "--result " + (dir / "result.json").string() + " --interpret " +
                     (dir / "interpret.toml").string() + " --out " + (dir / "report.json").string());
  return steps;
}

// Every output file except logs, keyed by path relative to `dir`. The
// wall-clock line of manifests is dropped.
inline std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "log.txt") continue;
    std::string text = read_text(e.path());
    if (e.path().string().ends_with("manifest.json")) {
      std::istringstream in(text);
      std::string line, kept;
      while (std::getline(in, line))
        if (line.find("\"wall_time_seconds\"") == std::string::npos) kept += line + "\n";
      text = kept;
    }
    out[fs::relative(e.path(), dir).string()] = text;
  }
  return out;
}

}  // namespace pipeline
