#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "lmt/commands.hpp"
#include "lmt/common.hpp"
#include "lmt/manifest.hpp"

namespace cmd = lmt::commands;

namespace {

struct CommonFlags {
  std::string config;
  std::int64_t seed = -1;
  int threads = 0;
  std::string log_level;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "TOML configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "random seed")->check(CLI::NonNegativeNumber);
  app->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  app->add_option("--log-level", f.log_level, "trace|debug|info|warn|error|critical|off");
}

cmd::Common to_common(const CommonFlags& f) {
  cmd::Common c;
  if (!f.config.empty()) c.config = f.config;
  if (f.seed >= 0) c.overrides.seed = static_cast<std::uint64_t>(f.seed);
  if (f.threads > 0) c.overrides.threads = f.threads;
  if (!f.log_level.empty()) c.overrides.log_level = f.log_level;
  return c;
}

std::optional<cmd::Path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return cmd::Path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Labor-market tightness and wage regression toolkit"};
  app.set_version_flag("--version", std::string(lmt::manifest::kToolVersion));
  app.require_subcommand(1);

  CommonFlags common;
  std::string flows, adjacency, grid, out, out_dir;
  std::string vacancies, seekers, shares, zones, spells, limits, cells, cpi, panel, spec,
      residuals, result, interpret;

  auto* dz = app.add_subcommand("delineate-zones", "commuting zones from district flows");
  add_common(dz, common);
  dz->add_option("--flows", flows, "commuting flows")->required()->check(CLI::ExistingFile);
  dz->add_option("--adjacency", adjacency, "district adjacency")->check(CLI::ExistingFile);
  dz->add_option("--grid", grid, "thresholds, a:b:step or a comma list");
  dz->add_option("--out", out, "partition output")->required();

  auto* bt = app.add_subcommand("build-tightness", "market cells and instruments");
  add_common(bt, common);
  bt->add_option("--vacancies", vacancies)->required()->check(CLI::ExistingFile);
  bt->add_option("--seekers", seekers)->required()->check(CLI::ExistingFile);
  bt->add_option("--shares", shares)->check(CLI::ExistingFile);
  bt->add_option("--zones", zones, "partition from delineate-zones")->check(CLI::ExistingFile);
  bt->add_option("--spells", spells, "spells for flow-adjusted tightness")
      ->check(CLI::ExistingFile);
  bt->add_option("--out", out)->required();

  auto* im = app.add_subcommand("impute", "Tobit imputation of censored wages");
  add_common(im, common);
  im->add_option("--spells", spells)->required()->check(CLI::ExistingFile);
  im->add_option("--limits", limits, "censoring limits by year")->check(CLI::ExistingFile);
  im->add_option("--out", out)->required();

  auto* sim = app.add_subcommand("simulate", "synthetic panel with known elasticity");
  add_common(sim, common);
  sim->add_option("--out-dir", out_dir)->required();

  auto* mp = app.add_subcommand("merge-panel", "join spells, cells and instruments");
  add_common(mp, common);
  mp->add_option("--spells", spells)->required()->check(CLI::ExistingFile);
  mp->add_option("--cells", cells)->required()->check(CLI::ExistingFile);
  mp->add_option("--cpi", cpi)->check(CLI::ExistingFile);
  mp->add_option("--zones", zones)->check(CLI::ExistingFile);
  mp->add_option("--out", out)->required();

  auto* es = app.add_subcommand("estimate", "fixed-effects OLS or 2SLS");
  add_common(es, common);
  es->add_option("--panel", panel)->required()->check(CLI::ExistingFile);
  es->add_option("--spec", spec, "regression spec")->check(CLI::ExistingFile);
  es->add_option("--out", out)->required();
  es->add_option("--residuals", residuals, "residuals output");

  auto* rp = app.add_subcommand("report", "interpretation arithmetic and binned scatter");
  add_common(rp, common);
  rp->add_option("--result", result)->check(CLI::ExistingFile);
  rp->add_option("--interpret", interpret)->check(CLI::ExistingFile);
  rp->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cmd::kOk : cmd::kUsage;
  }

  try {
    const auto c = to_common(common);
    cmd::setup_logging(c.overrides.log_level.value_or("info"));
    if (c.config) {
      // the file may set the level when no flag does
      auto cfg = cmd::resolve(c);
      cmd::setup_logging(cfg.run.log_level);
    }
    if (dz->parsed()) {
      cmd::delineate_zones({c, flows, opt_path(adjacency),
                            grid.empty() ? std::nullopt : std::optional<std::string>(grid), out});
    } else if (bt->parsed()) {
      cmd::build_tightness({c, vacancies, seekers, opt_path(shares), opt_path(zones),
                            opt_path(spells), out});
    } else if (im->parsed()) {
      cmd::impute({c, spells, opt_path(limits), out});
    } else if (sim->parsed()) {
      cmd::simulate({c, out_dir});
    } else if (mp->parsed()) {
      cmd::merge_panel({c, spells, cells, opt_path(cpi), opt_path(zones), out});
    } else if (es->parsed()) {
      cmd::estimate({c, panel, opt_path(spec), out, opt_path(residuals)});
    } else if (rp->parsed()) {
      cmd::report({c, opt_path(result), opt_path(interpret), out});
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return cmd::exit_code_for(e);
  }
  return cmd::kOk;
}
