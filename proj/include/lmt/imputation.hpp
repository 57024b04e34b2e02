#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lmt/common.hpp"
#include "lmt/csv.hpp"
#include "lmt/data_model.hpp"

namespace lmt::imputation {

// Upper-tail hazard phi(a) / (1 - Phi(a)), stable for large a.
double upper_hazard(double a);
// log(1 - Phi(a)), stable for large a.
double log_upper_tail(double a);
// E[y | y > limit] for y ~ N(mean, sigma^2).
double upper_tail_mean(double mean, double sigma, double limit);

struct TobitOptions {
  std::size_t max_iterations = 200;
  double gradient_tol = 1e-10;  // max abs gradient of the mean log-likelihood
};

struct TobitFit {
  Eigen::VectorXd beta;
  double sigma = 0.0;
  Eigen::VectorXd se_beta;
  double se_sigma = 0.0;
  double loglik = 0.0;
  double start_loglik = 0.0;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
  std::size_t n = 0;
  std::size_t n_censored = 0;
};

// Thrown on non-convergence; carries the best iterate.
class TobitConvergenceError : public EstimationError {
 public:
  TobitConvergenceError(const std::string& what, TobitFit best)
      : EstimationError(what), best_(std::move(best)) {}
  const TobitFit& best() const { return best_; }

 private:
  TobitFit best_;
};

// Right-censored normal log-likelihood at (beta, sigma). For censored rows
// y is ignored and `limit` enters the survival term.
double tobit_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                    const Eigen::VectorXd& limit, const std::vector<char>& censored,
                    const Eigen::VectorXd& beta, double sigma);

// Maximum likelihood by damped Newton in (beta / sigma, 1 / sigma), started
// from least squares on the uncensored rows.
TobitFit fit_tobit(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Eigen::VectorXd& limit,
                   const std::vector<char>& censored, const TobitOptions& options = {});

struct CellKey {
  int year = 0;
  Gender gender = Gender::male;
  Education education = Education::medium;
  auto operator<=>(const CellKey&) const = default;
};

struct CellReport {
  CellKey key;
  std::size_t n = 0;
  std::size_t n_censored = 0;
  std::vector<std::string> regressors;
  TobitFit step1;
  TobitFit step2;
  bool ok = false;
  std::string message;
};

enum class ImputeStatus { observed, imputed, failed };
std::string_view to_string(ImputeStatus s);

struct ImputeOptions {
  std::map<int, double> censor_limits;  // year -> EUR/day; falls back to the reported wage
  TobitOptions tobit;
  int threads = 1;
};

struct ImputeResult {
  std::vector<WorkerSpell> spells;  // wage_nominal replaced for imputed rows
  std::vector<ImputeStatus> status;
  std::vector<CellReport> cells;
  std::size_t imputed = 0;
  std::size_t failed = 0;
};

// Two-step imputation by (year, gender, education) cell on log wages.
// Step 1 regresses on an intercept, age, age^2, requirement-level dummies and
// the east flag; step 2 adds the leave-one-out firm-year mean of completed
// step-1 log wages (singleton firm-years use the cell mean). Censored rows
// receive exp of the conditional mean above the limit.
ImputeResult impute(const std::vector<WorkerSpell>& spells, const ImputeOptions& options = {});

// Spell table plus an imputation status column.
csv::Table result_to_table(const ImputeResult& r);

}  // namespace lmt::imputation
