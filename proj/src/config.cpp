#include "lmt/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "toml.hpp"

namespace lmt::config {

namespace {

// Typed access to one TOML table; every key read is marked, and finish()
// rejects whatever was not read.
class Section {
 public:
  Section(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

  bool present() const { return t_ != nullptr; }

  template <typename T>
  void get(const char* key, T& out) {
    const toml::node* n = find(key);
    if (!n) return;
    if constexpr (std::is_same_v<T, bool>) {
      auto v = n->value<bool>();
      if (!v) throw bad(key, "a boolean");
      out = *v;
    } else if constexpr (std::is_same_v<T, std::string>) {
      auto v = n->value<std::string>();
      if (!v) throw bad(key, "a string");
      out = *v;
    } else if constexpr (std::is_floating_point_v<T>) {
      auto v = n->value<double>();
      if (!v) throw bad(key, "a number");
      out = *v;
    } else {
      auto v = n->value<std::int64_t>();
      if (!v || *v < static_cast<std::int64_t>(std::numeric_limits<T>::min()) ||
          (*v > 0 && static_cast<std::uint64_t>(*v) > std::numeric_limits<T>::max()))
        throw bad(key, "an integer in range");
      out = static_cast<T>(*v);
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    if (!find(key)) return;
    T v{};
    get(key, v);
    out = v;
  }

  template <typename T>
  void get(const char* key, std::vector<T>& out) {
    const toml::node* n = find(key);
    if (!n) return;
    const auto* arr = n->as_array();
    if (!arr) throw bad(key, "an array");
    out.clear();
    for (const auto& el : *arr) {
      if constexpr (std::is_same_v<T, std::string>) {
        auto v = el.value<std::string>();
        if (!v) throw bad(key, "an array of strings");
        out.push_back(*v);
      } else {
        auto v = el.value<double>();
        if (!v) throw bad(key, "an array of numbers");
        out.push_back(static_cast<T>(*v));
      }
    }
  }

  void get_path(const char* key, std::optional<std::filesystem::path>& out) {
    std::optional<std::string> s;
    get(key, s);
    if (s) out = *s;
  }

  const toml::table* table(const char* key) {
    const toml::node* n = find(key);
    if (!n) return nullptr;
    if (!n->is_table()) throw bad(key, "a table");
    return n->as_table();
  }

  void finish() const {
    if (!t_) return;
    for (const auto& [k, v] : *t_)
      if (!read_.count(std::string(k.str())))
        throw ValidationError("config: unknown key '" + prefix() + std::string(k.str()) + "'");
  }

  void skip(const char* key) { read_.insert(key); }

 private:
  const toml::node* find(const char* key) {
    if (!t_) return nullptr;
    read_.insert(key);
    return t_->get(key);
  }
  std::string prefix() const { return name_.empty() ? "" : name_ + "."; }
  ValidationError bad(const char* key, const char* what) const {
    return ValidationError("config: '" + prefix() + key + "' must be " + what);
  }

  const toml::table* t_;
  std::string name_;
  std::set<std::string> read_;
};

toml::table parse_toml(std::string_view text, const std::string& source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config: " << e.description() << " (" << source << " line " << e.source().begin.line
       << ")";
    throw ValidationError(os.str());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void read_spec(Section& s, estimator::RegressionSpec& spec) {
  s.get("outcome", spec.outcome);
  s.get("endogenous", spec.endogenous);
  s.get("instruments", spec.instruments);
  s.get("exogenous", spec.exogenous);
  s.get("fe", spec.fe);
  s.get("cluster", spec.cluster);
  s.get("weight", spec.weight);
  std::vector<double> trim;
  s.get("trim", trim);
  if (!trim.empty()) {
    if (trim.size() != 2) throw ValidationError("config: 'trim' must be [lower, upper]");
    spec.trim = TrimRule{trim[0], trim[1]};
  }
  s.get("quadratic", spec.quadratic);
  s.get("interact_by", spec.interact_by);
  s.get("interact_levels", spec.interact_levels);
  std::string method;
  s.get("demean_method", method);
  if (!method.empty()) spec.demean.method = estimator::parse_demean_method(method);
  s.get("demean_tol", spec.demean.tol);
  s.get("demean_max_iterations", spec.demean.max_iterations);
  s.get("weak_f_floor", spec.weak_f_floor);
}

void read_synth(Section& s, synth::SynthConfig& c) {
  s.get("alpha_true", c.alpha_true);
  s.get("rho", c.rho);
  s.get("delta", c.delta);
  s.get("occupations", c.occupations);
  s.get("regions", c.regions);
  s.get("years", c.years);
  s.get("first_year", c.first_year);
  s.get("workers_per_market", c.workers_per_market);
  s.get("firms_per_region", c.firms_per_region);
  s.get("base_log_theta", c.base_log_theta);
  s.get("trend", c.trend);
  s.get("sd_market", c.sd_market);
  s.get("sd_national", c.sd_national);
  s.get("sd_supply", c.sd_supply);
  s.get("sd_regional", c.sd_regional);
  s.get("sd_market_wage", c.sd_market_wage);
  s.get("sd_worker", c.sd_worker);
  s.get("sd_firm", c.sd_firm);
  s.get("sd_market_fe", c.sd_market_fe);
  s.get("sd_year_fe", c.sd_year_fe);
  s.get("sd_noise", c.sd_noise);
  s.get("mean_seekers", c.mean_seekers);
  s.get("sd_seekers_market", c.sd_seekers_market);
  s.get("sd_seekers_noise", c.sd_seekers_noise);
  s.get("base_log_wage", c.base_log_wage);
  s.get("age_sq_coef", c.age_sq_coef);
  s.get("switch_prob", c.switch_prob);
  s.get("cpi_growth", c.cpi_growth);
}

void read_interpret(Section& s, Interpretation& i) {
  s.get("coefficient", i.coefficient);
  s.get("elasticity", i.elasticity);
  s.get("elasticity_bounds", i.elasticity_bounds);
  s.get("tightness_growth_pct", i.tightness_growth_pct);
  s.get("wage_growth_pct", i.wage_growth_pct);
  s.get("w0", i.w0);
  s.get("theta0", i.theta0);
  s.get("gva", i.gva);
  s.get("workforce", i.workforce);
  s.get("days", i.days);
  s.get("decile_observed_growth_pct", i.decile_observed_growth_pct);
  s.get("decile_elasticity", i.decile_elasticity);
  s.get("decile_tightness_growth_pct", i.decile_tightness_growth_pct);
}

void read_binscatter(Section& s, BinscatterSettings& b) {
  s.get_path("panel", b.panel);
  s.get("x", b.x);
  s.get("y", b.y);
  s.get("bins", b.bins);
  s.get("fe", b.fe);
  s.get("controls", b.controls);
  s.get_path("out", b.out);
}

Config from_table(const toml::table& root) {
  Config c = defaults();
  Section top(&root, "");

  Section run(top.table("run"), "run");
  run.get("seed", c.run.seed);
  run.get("threads", c.run.threads);
  run.get("log_level", c.run.log_level);
  run.finish();

  Section panel(top.table("panel"), "panel");
  panel.get("occupation_digits", c.panel.occupation_digits);
  std::string scheme;
  panel.get("region_scheme", scheme);
  if (!scheme.empty()) c.panel.region_scheme = parse_region_scheme(scheme);
  panel.get("base_year", c.panel.base_year);
  panel.get("first_year", c.panel.first_year);
  panel.get("last_year", c.panel.last_year);
  std::vector<double> trim;
  panel.get("trim", trim);
  if (!trim.empty()) {
    if (trim.size() != 2) throw ValidationError("config: 'panel.trim' must be [lower, upper]");
    c.panel.trim = TrimRule{trim[0], trim[1]};
  }
  if (const auto* limits = panel.table("censor_limits")) {
    for (const auto& [k, v] : *limits) {
      auto year = csv::parse_int(k.str());
      auto value = v.value<double>();
      if (!year || !value)
        throw ValidationError("config: 'panel.censor_limits' maps years to numbers");
      c.panel.censor_limits[static_cast<int>(*year)] = *value;
    }
  }
  panel.finish();

  Section zones(top.table("zones"), "zones");
  zones.get("grid", c.zones_grid);
  zones.finish();

  Section tight(top.table("tightness"), "tightness");
  std::string mode, measure;
  tight.get("share_mode", mode);
  tight.get("measure", measure);
  if (!mode.empty()) c.share_mode = tightness::parse_share_mode(mode);
  if (!measure.empty()) c.measure = instruments::parse_measure(measure);
  tight.finish();

  Section imp(top.table("imputation"), "imputation");
  imp.get("max_iterations", c.tobit.max_iterations);
  imp.get("gradient_tol", c.tobit.gradient_tol);
  imp.finish();

  Section est(top.table("estimate"), "estimate");
  read_spec(est, c.spec);
  est.finish();

  Section syn(top.table("synth"), "synth");
  read_synth(syn, c.synth);
  syn.finish();

  Section interp(top.table("interpret"), "interpret");
  read_interpret(interp, c.interpret);
  interp.finish();

  Section bins(top.table("binscatter"), "binscatter");
  read_binscatter(bins, c.binscatter);
  bins.finish();

  top.finish();
  c.synth.seed = c.run.seed;
  c.panel.validate();
  return c;
}

}  // namespace

Config defaults() { return Config{}; }

Config parse(std::string_view text, const std::string& source) {
  return from_table(parse_toml(text, source));
}

Config load(const std::optional<std::filesystem::path>& path) {
  if (!path) return defaults();
  return parse(read_text(*path), path->string());
}

void apply(Config& c, const Overrides& o) {
  if (o.seed) {
    c.run.seed = *o.seed;
    c.synth.seed = *o.seed;
  }
  if (o.threads) c.run.threads = *o.threads;
  if (o.log_level) c.run.log_level = *o.log_level;
  if (c.run.threads < 1) throw ValidationError("threads must be at least 1");
  c.spec.demean.threads = c.run.threads;
}

estimator::RegressionSpec parse_spec(std::string_view text, const std::string& source) {
  const auto root = parse_toml(text, source);
  estimator::RegressionSpec spec;
  Section top(&root, "");
  if (const auto* t = top.table("estimate")) {
    Section est(t, "estimate");
    read_spec(est, spec);
    est.finish();
  } else {
    read_spec(top, spec);
  }
  top.finish();
  spec.validate();
  return spec;
}

estimator::RegressionSpec load_spec(const std::filesystem::path& path) {
  return parse_spec(read_text(path), path.string());
}

Config load_interpretation(const std::filesystem::path& path) {
  const auto root = parse_toml(read_text(path), path.string());
  Config c = defaults();
  Section top(&root, "");
  const auto* it = top.table("interpret");
  if (it) {
    Section s(it, "interpret");
    read_interpret(s, c.interpret);
    s.finish();
  }
  if (const auto* bt = top.table("binscatter")) {
    Section s(bt, "binscatter");
    read_binscatter(s, c.binscatter);
    s.finish();
  }
  if (!it) read_interpret(top, c.interpret);
  top.finish();
  return c;
}

nlohmann::json spec_to_json(const estimator::RegressionSpec& s) {
  nlohmann::json j;
  j["outcome"] = s.outcome;
  j["endogenous"] = s.endogenous;
  j["instruments"] = s.instruments;
  j["exogenous"] = s.exogenous;
  j["fe"] = s.fe;
  j["cluster"] = s.cluster;
  j["weight"] = s.weight ? nlohmann::json(*s.weight) : nlohmann::json(nullptr);
  j["trim"] = s.trim ? nlohmann::json({s.trim->lower_pct, s.trim->upper_pct})
                     : nlohmann::json(nullptr);
  j["quadratic"] = s.quadratic;
  j["interact_by"] = s.interact_by ? nlohmann::json(*s.interact_by) : nlohmann::json(nullptr);
  j["interact_levels"] = s.interact_levels;
  j["demean_method"] = s.demean.method == estimator::DemeanMethod::cg ? "cg" : "map";
  j["demean_tol"] = s.demean.tol;
  j["demean_max_iterations"] = s.demean.max_iterations;
  j["weak_f_floor"] = s.weak_f_floor;
  return j;
}

nlohmann::json synth_to_json(const synth::SynthConfig& c) {
  return {{"alpha_true", c.alpha_true},
          {"rho", c.rho},
          {"delta", c.delta},
          {"occupations", c.occupations},
          {"regions", c.regions},
          {"years", c.years},
          {"first_year", c.first_year},
          {"workers_per_market", c.workers_per_market},
          {"firms_per_region", c.firms_per_region},
          {"base_log_theta", c.base_log_theta},
          {"trend", c.trend},
          {"sd_market", c.sd_market},
          {"sd_national", c.sd_national},
          {"sd_supply", c.sd_supply},
          {"sd_regional", c.sd_regional},
          {"sd_market_wage", c.sd_market_wage},
          {"sd_worker", c.sd_worker},
          {"sd_firm", c.sd_firm},
          {"sd_market_fe", c.sd_market_fe},
          {"sd_year_fe", c.sd_year_fe},
          {"sd_noise", c.sd_noise},
          {"mean_seekers", c.mean_seekers},
          {"sd_seekers_market", c.sd_seekers_market},
          {"sd_seekers_noise", c.sd_seekers_noise},
          {"base_log_wage", c.base_log_wage},
          {"age_sq_coef", c.age_sq_coef},
          {"switch_prob", c.switch_prob},
          {"cpi_growth", c.cpi_growth},
          {"seed", c.seed}};
}

nlohmann::json Config::to_json() const {
  nlohmann::json j;
  j["run"] = {{"seed", run.seed}, {"threads", run.threads}, {"log_level", run.log_level}};
  nlohmann::json limits = nlohmann::json::object();
  for (const auto& [y, v] : panel.censor_limits) limits[std::to_string(y)] = v;
  j["panel"] = {{"occupation_digits", panel.occupation_digits},
                {"region_scheme", std::string(to_string(panel.region_scheme))},
                {"base_year", panel.base_year},
                {"first_year", panel.first_year},
                {"last_year", panel.last_year},
                {"trim", panel.trim ? nlohmann::json({panel.trim->lower_pct, panel.trim->upper_pct})
                                    : nlohmann::json(nullptr)},
                {"censor_limits", limits}};
  j["zones"] = {{"grid", zones_grid}};
  j["tightness"] = {{"share_mode", std::string(tightness::to_string(share_mode))},
                    {"measure", measure == instruments::Measure::baseline ? "baseline"
                                                                          : "flow_adjusted"}};
  j["imputation"] = {{"max_iterations", tobit.max_iterations},
                     {"gradient_tol", tobit.gradient_tol}};
  j["estimate"] = spec_to_json(spec);
  j["synth"] = synth_to_json(synth);
  j["interpret"] = {{"coefficient", interpret.coefficient},
                    {"elasticity", interpret.elasticity ? nlohmann::json(*interpret.elasticity)
                                                        : nlohmann::json(nullptr)},
                    {"elasticity_bounds", interpret.elasticity_bounds},
                    {"tightness_growth_pct", interpret.tightness_growth_pct},
                    {"wage_growth_pct", interpret.wage_growth_pct},
                    {"w0", interpret.w0},
                    {"theta0", interpret.theta0},
                    {"gva", interpret.gva},
                    {"workforce", interpret.workforce},
                    {"days", interpret.days},
                    {"decile_observed_growth_pct", interpret.decile_observed_growth_pct},
                    {"decile_elasticity", interpret.decile_elasticity},
                    {"decile_tightness_growth_pct", interpret.decile_tightness_growth_pct}};
  j["binscatter"] = {{"panel", binscatter.panel ? nlohmann::json(binscatter.panel->string())
                                                : nlohmann::json(nullptr)},
                     {"x", binscatter.x},
                     {"y", binscatter.y},
                     {"bins", binscatter.bins},
                     {"fe", binscatter.fe},
                     {"controls", binscatter.controls},
                     {"out", binscatter.out ? nlohmann::json(binscatter.out->string())
                                            : nlohmann::json(nullptr)}};
  return j;
}

}  // namespace lmt::config
