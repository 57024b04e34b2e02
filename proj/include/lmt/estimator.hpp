#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "lmt/common.hpp"
#include "lmt/csv.hpp"
#include "lmt/data_model.hpp"

namespace lmt::estimator {

// Column store for estimation panels. Columns are either numeric or text;
// numeric() parses text columns on demand (missing -> NaN) and text()
// formats numeric ones.
class Frame {
 public:
  Frame() = default;
  static Frame from_table(const csv::Table& t);
  csv::Table to_table() const;

  std::size_t rows() const { return rows_; }
  bool has(const std::string& name) const { return columns_.count(name) > 0; }
  std::vector<std::string> names() const { return order_; }

  std::vector<double> numeric(const std::string& name) const;
  std::vector<std::string> text(const std::string& name) const;
  bool is_numeric(const std::string& name) const;

  void set(const std::string& name, std::vector<double> values);
  void set(const std::string& name, std::vector<std::string> values);

 private:
  using Column = std::variant<std::vector<double>, std::vector<std::string>>;
  const Column& column(const std::string& name) const;
  void check_length(std::size_t n);

  std::map<std::string, Column> columns_;
  std::vector<std::string> order_;
  std::size_t rows_ = 0;
};

// Dense integer codes 0..groups-1 for one categorical dimension.
struct FactorCodes {
  std::string name;
  std::vector<std::uint32_t> codes;
  std::uint32_t groups = 0;
};

// Encodes a dimension given as "col" or "col1#col2#..." (interaction).
FactorCodes encode_factor(const Frame& frame, const std::string& dimension);
FactorCodes encode_codes(std::string name, std::span<const std::int64_t> raw);
// Re-encodes to dense codes after a row subset.
FactorCodes subset(const FactorCodes& f, std::span<const std::size_t> rows);

struct SingletonResult {
  std::vector<std::size_t> kept;  // indices into the input rows
  std::size_t dropped = 0;
  std::size_t rounds = 0;
};

// Iteratively removes rows that are the only member of a group in any
// dimension. Throws EstimationError("no identifying variation") when
// nothing remains.
SingletonResult drop_singletons(const std::vector<FactorCodes>& dims);

enum class DemeanMethod { cg, map };
DemeanMethod parse_demean_method(std::string_view s);

struct DemeanOptions {
  double tol = 1e-8;             // max absolute change per iteration
  std::size_t max_iterations = 10000;
  DemeanMethod method = DemeanMethod::cg;
  int threads = 1;
};

struct DemeanReport {
  std::size_t iterations = 0;  // max over columns
  double last_delta = 0.0;
};

// Residualizes every column of `columns` (in place) against all fixed-effect
// dimensions by alternating weighted group-mean projections. Columns are
// processed independently. `weights` may be empty (all ones).
DemeanReport demean(Eigen::MatrixXd& columns, const std::vector<FactorCodes>& dims,
                    std::span<const double> weights, const DemeanOptions& options = {});

// Absorbed-FE degrees of freedom: the first dimension counts fully, the
// second loses one per connected component of its bipartite graph with the
// first, later dimensions lose one each; a dimension that is a coarsening
// of an earlier one is fully redundant and counts zero.
double absorbed_dof(const std::vector<FactorCodes>& dims, bool* approximate = nullptr);

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p = 1.0;
  std::string stars;
};

struct FirstStage {
  std::string endogenous;
  std::vector<Coefficient> excluded;  // coefficients on excluded instruments
  double f_stat = 0.0;                // cluster-robust Wald F
  std::size_t df1 = 0;
  bool weak = false;
};

struct EstimationResult {
  std::string method;  // "ols" or "2sls"
  std::vector<Coefficient> coefficients;
  Eigen::MatrixXd vcov;
  std::size_t n = 0;
  std::size_t clusters = 0;
  std::size_t k_regressors = 0;
  double df_absorbed = 0.0;
  bool dof_approximate = false;
  double small_sample_factor = 1.0;
  std::vector<FirstStage> first_stage;
  std::vector<double> residuals;
  std::vector<std::size_t> sample_rows;  // frame rows in the estimation sample
  std::size_t dropped_missing = 0;
  std::size_t dropped_trim = 0;
  std::size_t dropped_singletons = 0;
  std::size_t demean_iterations = 0;
  bool degenerate = false;  // exact fit; standard errors reported as 0
  std::vector<std::string> warnings;

  const Coefficient& coefficient(const std::string& name) const;
};

// Low-level fits on already demeaned data. Weights may be empty.
struct FitInput {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;  // regressors (endogenous first for 2SLS)
  Eigen::MatrixXd z;  // instruments + exogenous regressors (2SLS only)
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  std::size_t n_endogenous = 0;
  std::vector<double> weights;
  FactorCodes cluster;
  double df_absorbed = 0.0;
};

EstimationResult fit_ols(const FitInput& in);
EstimationResult fit_tsls(const FitInput& in, double weak_f_floor = 10.0);

struct RegressionSpec {
  std::string outcome;
  std::vector<std::string> endogenous;
  std::vector<std::string> instruments;
  std::vector<std::string> exogenous;
  std::vector<std::string> fe;  // each "col" or "col1#col2"
  std::string cluster;
  std::optional<std::string> weight;
  std::optional<TrimRule> trim;
  bool quadratic = false;
  std::optional<std::string> interact_by;
  std::vector<std::string> interact_levels;
  DemeanOptions demean;
  double weak_f_floor = 10.0;

  void validate() const;
};

// Full pipeline: complete-case sample, trimming, derived columns, singleton
// dropping, demeaning, then OLS (no endogenous) or 2SLS.
EstimationResult estimate(const RegressionSpec& spec, const Frame& frame);

std::string significance_stars(double p);

}  // namespace lmt::estimator
