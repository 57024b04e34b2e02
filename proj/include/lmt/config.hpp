#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "lmt/data_model.hpp"
#include "lmt/estimator.hpp"
#include "lmt/imputation.hpp"
#include "lmt/instruments.hpp"
#include "lmt/synth.hpp"
#include "lmt/tightness.hpp"

namespace lmt::config {

struct RunSettings {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string log_level = "info";
};

struct Interpretation {
  std::string coefficient = "log_theta";   // read from result.json when elasticity is unset
  std::optional<double> elasticity;
  std::vector<double> elasticity_bounds;   // extra elasticities to translate
  double tightness_growth_pct = 133.3;
  double wage_growth_pct = 7.9;
  double w0 = 106.25;
  double theta0 = 0.24;
  double gva = 2.3639e12;
  double workforce = 4.1586e7;
  double days = 365.0;
  std::vector<double> decile_observed_growth_pct;
  std::vector<double> decile_elasticity;
  std::vector<double> decile_tightness_growth_pct;
};

struct BinscatterSettings {
  std::optional<std::filesystem::path> panel;
  std::string x = "log_theta";
  std::string y = "log_wage";
  std::size_t bins = 100;
  std::vector<std::string> fe;
  std::vector<std::string> controls;
  std::optional<std::filesystem::path> out;
};

// Effective configuration: defaults, then the file, then command-line flags.
struct Config {
  RunSettings run;
  PanelConfig panel;
  std::string zones_grid = "0.02:0.20:0.01";
  tightness::ShareMode share_mode = tightness::ShareMode::yearly;
  instruments::Measure measure = instruments::Measure::baseline;
  imputation::TobitOptions tobit;
  estimator::RegressionSpec spec;
  synth::SynthConfig synth;
  Interpretation interpret;
  BinscatterSettings binscatter;

  nlohmann::json to_json() const;
};

Config defaults();

// Reads a TOML file over the defaults. Unknown keys are rejected.
Config load(const std::optional<std::filesystem::path>& path);
Config parse(std::string_view toml_text, const std::string& source = "<memory>");

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> log_level;
};
void apply(Config& c, const Overrides& o);

// A regression spec file: keys at top level or in an [estimate] table.
estimator::RegressionSpec load_spec(const std::filesystem::path& path);
estimator::RegressionSpec parse_spec(std::string_view toml_text, const std::string& source = "<memory>");
nlohmann::json spec_to_json(const estimator::RegressionSpec& s);

// An interpretation file: keys at top level or in an [interpret] table,
// plus an optional [binscatter] table.
Config load_interpretation(const std::filesystem::path& path);

nlohmann::json synth_to_json(const synth::SynthConfig& s);

}  // namespace lmt::config
