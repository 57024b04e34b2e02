#include "lmt/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "lmt/analysis.hpp"
#include "lmt/csv.hpp"
#include "lmt/data_model.hpp"
#include "lmt/imputation.hpp"
#include "lmt/instruments.hpp"
#include "lmt/manifest.hpp"
#include "lmt/panel.hpp"
#include "lmt/synth.hpp"
#include "lmt/tightness.hpp"
#include "lmt/zones.hpp"

namespace lmt::commands {

namespace {

using Clock = std::chrono::steady_clock;

class Run {
 public:
  Run(std::string command, const config::Config& cfg) : start_(Clock::now()) {
    m_.command = std::move(command);
    m_.set_config(cfg.to_json());
  }
  manifest::RunManifest& manifest() { return m_; }
  void input(const Path& p) { m_.add_input(p); }
  void output(const Path& p) { m_.add_output(p); }
  void finish(const Path& manifest_path) {
    m_.wall_time_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
    manifest::write(manifest_path, m_);
    spdlog::info("{}: wrote manifest {}", m_.command, manifest_path.string());
  }

 private:
  manifest::RunManifest m_;
  Clock::time_point start_;
};

void write_json(const Path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

nlohmann::json read_json(const Path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void log_rejects(const LoadDiagnostics& d) {
  for (const auto& r : d.rejected)
    spdlog::warn("{} line {}: rejected ({})", r.table, r.line, r.reason);
  for (const auto& [table, n] : d.rows_read)
    spdlog::info("{}: {} rows read, {} accepted", table, n,
                 d.rows_accepted.count(table) ? d.rows_accepted.at(table) : 0);
}

tightness::RegionMap region_map(const config::Config& cfg, const std::optional<Path>& zones,
                                Run& run) {
  std::map<std::string, std::string> zone_map;
  if (cfg.panel.region_scheme == RegionScheme::zones) {
    if (!zones) throw ValidationError("region scheme 'zones' needs --zones");
    zone_map = zones::read_zone_map(csv::read(*zones));
    run.input(*zones);
  }
  return tightness::RegionMap(cfg.panel.region_scheme, std::move(zone_map));
}

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json coefficient_json(const estimator::Coefficient& c) {
  return {{"name", c.name}, {"estimate", number(c.estimate)}, {"se", number(c.se)},
          {"t", number(c.t)}, {"p", number(c.p)},               {"stars", c.stars}};
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return kValidation;
  if (dynamic_cast<const EstimationError*>(&e)) return kEstimation;
  if (dynamic_cast<const IoError*>(&e)) return kIo;
  return kOther;
}

void setup_logging(const std::string& level) {
  auto logger = spdlog::get("lmt");
  if (!logger) logger = spdlog::stderr_logger_mt("lmt");
  spdlog::set_default_logger(logger);
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off")
    throw ValidationError("unknown log level '" + level + "'");
  spdlog::set_level(lvl);
  spdlog::set_pattern("[%l] %v");
}

config::Config resolve(const Common& c) {
  auto cfg = config::load(c.config);
  config::apply(cfg, c.overrides);
  return cfg;
}

void delineate_zones(const DelineateArgs& a) {
  auto cfg = resolve(a.common);
  if (a.grid) cfg.zones_grid = *a.grid;
  Run run("delineate-zones", cfg);
  TablePaths paths;
  paths.flows = a.flows;
  paths.adjacency = a.adjacency;
  auto bundle = load_tables(paths, cfg.panel);
  log_rejects(bundle.diagnostics);
  run.input(a.flows);
  if (a.adjacency) run.input(*a.adjacency);
  auto flows = zones::FlowMatrix::from_records(bundle.flows, bundle.adjacency);
  const auto grid = zones::parse_grid(cfg.zones_grid);
  auto p = zones::delineate(flows, grid, cfg.run.threads);
  spdlog::info("delineate-zones: {} districts -> {} zones, Q = {}", flows.size(), p.zones, p.q);
  csv::write(a.out, zones::partition_to_table(flows, p));
  run.output(a.out);
  run.finish(manifest::manifest_path_for(a.out));
}

void build_tightness(const BuildTightnessArgs& a) {
  auto cfg = resolve(a.common);
  Run run("build-tightness", cfg);
  TablePaths paths;
  paths.vacancies = a.vacancies;
  paths.seekers = a.seekers;
  paths.shares = a.shares;
  paths.spells = a.spells;
  auto bundle = load_tables(paths, cfg.panel);
  log_rejects(bundle.diagnostics);
  run.input(a.vacancies);
  run.input(a.seekers);
  if (a.shares) run.input(*a.shares);
  else if (cfg.share_mode != tightness::ShareMode::registered_only)
    throw ValidationError("--shares is required unless share_mode = registered_only");
  const auto regions = region_map(cfg, a.zones, run);
  tightness::ShareTable shares(bundle.shares, cfg.share_mode);
  auto cells = tightness::build_cells(bundle.vacancies, bundle.seekers, shares, regions,
                                      {cfg.panel.occupation_digits});
  if (a.spells) {
    run.input(*a.spells);
    auto weights = tightness::transition_weights(bundle.spells, cfg.panel.occupation_digits,
                                                 cfg.panel.first_year, cfg.panel.last_year);
    for (const auto& o : weights.fallback())
      spdlog::warn("occupation {} has no stayers; flow weights fall back to the indicator", o);
    cells = tightness::flow_adjust(std::move(cells), weights);
  } else if (cfg.measure == instruments::Measure::flow_adjusted) {
    throw ValidationError("measure flow_adjusted needs --spells for transition weights");
  }
  std::size_t undefined = 0;
  for (const auto& c : cells) undefined += !c.theta_defined();
  spdlog::info("build-tightness: {} cells, {} with undefined theta", cells.size(), undefined);
  const auto inst = instruments::build(cells, cfg.measure);
  csv::write(a.out, instruments::append_to_table(tightness::cells_to_table(cells), inst));
  run.output(a.out);
  run.finish(manifest::manifest_path_for(a.out));
}

void impute(const ImputeArgs& a) {
  auto cfg = resolve(a.common);
  Run run("impute", cfg);
  LoadDiagnostics diag;
  auto limits = cfg.panel.censor_limits;
  if (a.limits) {
    for (const auto& [y, v] : parse_limits(csv::read(*a.limits))) limits[y] = v;
    run.input(*a.limits);
  }
  PanelConfig pc = cfg.panel;
  pc.censor_limits = limits;
  auto spells = parse_spells(csv::read(a.spells), pc, diag);
  log_rejects(diag);
  run.input(a.spells);
  imputation::ImputeOptions opt;
  opt.censor_limits = limits;
  opt.tobit = cfg.tobit;
  opt.threads = cfg.run.threads;
  auto result = imputation::impute(spells, opt);
  for (const auto& c : result.cells)
    if (!c.ok)
      spdlog::warn("cell year={} gender={} education={}: {}", c.key.year, to_string(c.key.gender),
                   to_string(c.key.education), c.message);
  spdlog::info("impute: {} rows imputed, {} could not be imputed", result.imputed, result.failed);
  csv::write(a.out, imputation::result_to_table(result));
  run.output(a.out);
  run.finish(manifest::manifest_path_for(a.out));
}

void simulate(const SimulateArgs& a) {
  auto cfg = resolve(a.common);
  Run run("simulate", cfg);
  run.manifest().seeds = {cfg.synth.seed};
  std::error_code ec;
  std::filesystem::create_directories(a.out_dir, ec);
  if (ec) throw IoError("cannot create '" + a.out_dir.string() + "': " + ec.message());
  auto data = synth::generate(cfg.synth);
  spdlog::info("simulate: {} cells, {} worker-years", data.cells.size(), data.rows.size());
  auto emit = [&](const std::string& name, const csv::Table& t) {
    const auto p = a.out_dir / name;
    csv::write(p, t);
    run.output(p);
  };
  emit("spells.csv", spells_to_table(synth::spells(data)));
  emit("vacancies.csv", vacancies_to_table(synth::vacancies(data)));
  emit("seekers.csv", seekers_to_table(synth::seekers(data)));
  emit("shares.csv", shares_to_table(synth::shares(data)));
  emit("cpi.csv", cpi_to_table(synth::cpi(data)));
  emit("zones.csv", synth::zone_table(data));
  nlohmann::json truth = {{"alpha_true", data.truth.alpha_true},
                          {"rho", data.truth.rho},
                          {"delta", data.truth.delta},
                          {"seed", data.truth.seed},
                          {"config", config::synth_to_json(cfg.synth)}};
  const auto truth_path = a.out_dir / "truth.json";
  write_json(truth_path, truth);
  run.output(truth_path);
  run.finish(a.out_dir / "manifest.json");
}

void merge_panel(const MergePanelArgs& a) {
  auto cfg = resolve(a.common);
  Run run("merge-panel", cfg);
  TablePaths paths;
  paths.spells = a.spells;
  paths.cpi = a.cpi;
  auto bundle = load_tables(paths, cfg.panel);
  log_rejects(bundle.diagnostics);
  run.input(a.spells);
  auto spells = derive_hires(std::move(bundle.spells));
  if (bundle.cpi) {
    run.input(*a.cpi);
    spells = deflate(std::move(spells), *bundle.cpi, cfg.panel.base_year);
  } else {
    spdlog::warn("merge-panel: no --cpi given; wages stay nominal");
  }
  auto cells = tightness::cells_from_table(csv::read(a.cells));
  run.input(a.cells);
  const auto regions = region_map(cfg, a.zones, run);
  auto frame = panel::build(spells, cells, regions, {cfg.panel.occupation_digits, cfg.measure});
  spdlog::info("merge-panel: {} rows", frame.rows());
  csv::write(a.out, frame.to_table());
  run.output(a.out);
  run.finish(manifest::manifest_path_for(a.out));
}

nlohmann::json result_to_json(const estimator::EstimationResult& r,
                              const estimator::RegressionSpec& spec) {
  nlohmann::json j;
  j["method"] = r.method;
  j["coefficients"] = nlohmann::json::array();
  for (const auto& c : r.coefficients) j["coefficients"].push_back(coefficient_json(c));
  nlohmann::json vcov = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.vcov.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < r.vcov.cols(); ++k) row.push_back(number(r.vcov(i, k)));
    vcov.push_back(row);
  }
  j["vcov"] = vcov;
  j["n"] = r.n;
  j["clusters"] = r.clusters;
  j["k_regressors"] = r.k_regressors;
  j["df_absorbed"] = r.df_absorbed;
  j["dof_approximate"] = r.dof_approximate;
  j["small_sample_factor"] = r.small_sample_factor;
  j["first_stage"] = nlohmann::json::array();
  for (const auto& fs : r.first_stage) {
    nlohmann::json f = {{"endogenous", fs.endogenous},
                        {"f_stat", number(fs.f_stat)},
                        {"df1", fs.df1},
                        {"weak", fs.weak}};
    f["excluded"] = nlohmann::json::array();
    for (const auto& c : fs.excluded) f["excluded"].push_back(coefficient_json(c));
    j["first_stage"].push_back(f);
  }
  j["dropped_missing"] = r.dropped_missing;
  j["dropped_trim"] = r.dropped_trim;
  j["dropped_singletons"] = r.dropped_singletons;
  j["demean_iterations"] = r.demean_iterations;
  j["degenerate"] = r.degenerate;
  j["warnings"] = r.warnings;
  j["fe_dims"] = spec.fe;
  j["spec"] = config::spec_to_json(spec);
  return j;
}

void estimate(const EstimateArgs& a) {
  auto cfg = resolve(a.common);
  auto spec = a.spec ? config::load_spec(*a.spec) : cfg.spec;
  spec.demean.threads = cfg.run.threads;
  spec.validate();
  cfg.spec = spec;
  Run run("estimate", cfg);
  run.manifest().config["fe_dims"] = spec.fe;
  auto frame = estimator::Frame::from_table(csv::read(a.panel));
  run.input(a.panel);
  if (a.spec) run.input(*a.spec);
  auto result = estimator::estimate(spec, frame);
  for (const auto& w : result.warnings) spdlog::warn("estimate: {}", w);
  spdlog::info("estimate: {} on N = {}, G = {}", result.method, result.n, result.clusters);
  auto j = result_to_json(result, spec);
  j["residuals"] = a.residuals ? nlohmann::json(a.residuals->string()) : nlohmann::json(nullptr);
  write_json(a.out, j);
  run.output(a.out);
  if (a.residuals) {
    csv::Table t;
    t.header = {"row", "residual"};
    for (std::size_t k = 0; k < result.residuals.size(); ++k)
      t.rows.push_back({std::to_string(result.sample_rows[k] + 1),
                        csv::format_double(result.residuals[k])});
    csv::write(*a.residuals, t);
    run.output(*a.residuals);
  }
  run.finish(manifest::manifest_path_for(a.out));
}

void report(const ReportArgs& a) {
  auto cfg = resolve(a.common);
  if (a.interpret) {
    auto file = config::load_interpretation(*a.interpret);
    cfg.interpret = file.interpret;
    cfg.binscatter = file.binscatter;
  }
  Run run("report", cfg);
  if (a.interpret) run.input(*a.interpret);
  const auto& in = cfg.interpret;

  nlohmann::json out;
  double elasticity = 0.0;
  if (in.elasticity) {
    elasticity = *in.elasticity;
    out["elasticity_source"] = "interpretation file";
  } else {
    if (!a.result) throw ValidationError("report needs --result or an elasticity in the interpretation");
    const auto res = read_json(*a.result);
    run.input(*a.result);
    bool found = false;
    for (const auto& c : res.at("coefficients"))
      if (c.at("name") == in.coefficient) {
        elasticity = c.at("estimate").get<double>();
        found = true;
      }
    if (!found) throw ValidationError("result has no coefficient '" + in.coefficient + "'");
    out["elasticity_source"] = a.result->string() + ":" + in.coefficient;
  }

  auto translate = [&](double e) {
    const auto c = analysis::contribution_share(e, in.tightness_growth_pct, in.wage_growth_pct);
    return nlohmann::json{
        {"elasticity", e},
        {"wage_effect_pct", c.wage_effect_pct},
        {"share_pct", c.share_pct},
        {"wage_setting_level",
         analysis::wage_setting_level(e, in.w0, in.theta0, in.gva, in.workforce, in.days)}};
  };
  out["elasticity"] = elasticity;
  out["tightness_growth_pct"] = in.tightness_growth_pct;
  out["wage_growth_pct"] = in.wage_growth_pct;
  out["productivity_daily"] = in.gva / (in.workforce * in.days);
  out["main"] = translate(elasticity);
  out["bounds"] = nlohmann::json::array();
  for (double e : in.elasticity_bounds) out["bounds"].push_back(translate(e));

  if (!in.decile_observed_growth_pct.empty()) {
    const auto d = analysis::decile_counterfactual(in.decile_observed_growth_pct,
                                                   in.decile_elasticity,
                                                   in.decile_tightness_growth_pct);
    out["deciles"] = {{"observed_growth_pct", in.decile_observed_growth_pct},
                      {"counterfactual_growth_pct", d.counterfactual},
                      {"gap_observed", d.gap_observed},
                      {"gap_counterfactual", d.gap_counterfactual},
                      {"gap_change", d.gap_change}};
  }

  if (cfg.binscatter.panel) {
    const auto& b = cfg.binscatter;
    auto frame = estimator::Frame::from_table(csv::read(*b.panel));
    run.input(*b.panel);
    auto x = frame.numeric(b.x), y = frame.numeric(b.y);
    std::vector<std::vector<double>> controls;
    for (const auto& c : b.controls) controls.push_back(frame.numeric(c));
    std::vector<estimator::FactorCodes> dims;
    for (const auto& d : b.fe) dims.push_back(estimator::encode_factor(frame, d));
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < frame.rows(); ++i) {
      bool ok = std::isfinite(x[i]) && std::isfinite(y[i]);
      for (const auto& c : controls) ok = ok && std::isfinite(c[i]);
      for (const auto& d : dims) ok = ok && d.codes[i] != std::numeric_limits<std::uint32_t>::max();
      if (ok) rows.push_back(i);
    }
    std::vector<double> xs, ys;
    for (auto i : rows) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
    analysis::PartialOut po;
    po.controls.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(controls.size()));
    for (std::size_t c = 0; c < controls.size(); ++c)
      for (std::size_t k = 0; k < rows.size(); ++k)
        po.controls(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = controls[c][rows[k]];
    for (const auto& d : dims) po.dims.push_back(estimator::subset(d, rows));
    const bool partial = !dims.empty() || !controls.empty();
    auto bins = analysis::binscatter(xs, ys, b.bins, partial ? &po : nullptr);
    for (const auto& w : bins.warnings) spdlog::warn("binscatter: {}", w);
    Path bins_path = b.out ? *b.out : Path(a.out.string() + ".bins.csv");
    csv::write(bins_path, analysis::binscatter_to_table(bins));
    run.output(bins_path);
    out["binscatter"] = {{"x", b.x}, {"y", b.y}, {"bins", bins.bins.size()},
                         {"path", bins_path.string()}};
  }

  write_json(a.out, out);
  run.output(a.out);
  run.finish(manifest::manifest_path_for(a.out));
}

}  // namespace lmt::commands
