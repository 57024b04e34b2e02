#pragma once

#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "lmt/config.hpp"
#include "lmt/estimator.hpp"

namespace lmt::commands {

using Path = std::filesystem::path;

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kOther = 1;
inline constexpr int kUsage = 2;
inline constexpr int kValidation = 3;
inline constexpr int kEstimation = 4;
inline constexpr int kIo = 5;

int exit_code_for(const std::exception& e);

// Installs a stderr logger at the given level (trace, debug, info, warn,
// error, critical, off).
void setup_logging(const std::string& level);

struct Common {
  std::optional<Path> config;
  config::Overrides overrides;
};

// Defaults, then the config file, then flags.
config::Config resolve(const Common& c);

struct DelineateArgs {
  Common common;
  Path flows;
  std::optional<Path> adjacency;
  std::optional<std::string> grid;
  Path out;
};

struct BuildTightnessArgs {
  Common common;
  Path vacancies;
  Path seekers;
  std::optional<Path> shares;
  std::optional<Path> zones;
  std::optional<Path> spells;  // enables the flow-adjusted measure
  Path out;
};

struct ImputeArgs {
  Common common;
  Path spells;
  std::optional<Path> limits;
  Path out;
};

struct SimulateArgs {
  Common common;
  Path out_dir;
};

struct MergePanelArgs {
  Common common;
  Path spells;
  Path cells;
  std::optional<Path> cpi;
  std::optional<Path> zones;
  Path out;
};

struct EstimateArgs {
  Common common;
  Path panel;
  std::optional<Path> spec;  // falls back to the [estimate] table of the config
  Path out;
  std::optional<Path> residuals;
};

struct ReportArgs {
  Common common;
  std::optional<Path> result;
  std::optional<Path> interpret;
  Path out;
};

void delineate_zones(const DelineateArgs& a);
void build_tightness(const BuildTightnessArgs& a);
void impute(const ImputeArgs& a);
void simulate(const SimulateArgs& a);
void merge_panel(const MergePanelArgs& a);
void estimate(const EstimateArgs& a);
void report(const ReportArgs& a);

nlohmann::json result_to_json(const estimator::EstimationResult& r,
                              const estimator::RegressionSpec& spec);

}  // namespace lmt::commands
