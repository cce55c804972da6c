#pragma once

#include "commitgate/metrics.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace commitgate {

// Counting-process design: row i is at risk on (start_i, stop_i] and has an
// event at stop_i iff event_i == 1.
struct SurvivalData {
  std::vector<std::string> names;
  Eigen::MatrixXd x;
  Eigen::VectorXd start;
  Eigen::VectorXd stop;
  Eigen::VectorXi event;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
  int events() const { return event.sum(); }
  void validate() const;  // throws InputError

  SurvivalData select_rows(const std::vector<Eigen::Index>& keep) const;
  SurvivalData select_columns(const std::vector<Eigen::Index>& keep) const;
};

// Covariate columns that are present on every row.
std::vector<int> complete_columns(const std::vector<PanelRow>& rows);
SurvivalData design_from_panel(const std::vector<PanelRow>& rows,
                               const std::vector<int>& columns);

enum class Ties { kEfron, kBreslow };

// ---- preprocessing -----------------------------------------------------------

struct ZScoreReport {
  std::size_t removed = 0;
  std::map<std::string, std::size_t> flagged_by_covariate;
};

// Removes rows where any screened covariate has |x - mean| / sd > threshold.
// mean and sample sd are computed per covariate over all rows; sd == 0 means
// the covariate removes nothing. `screened` defaults to every column.
SurvivalData zscore_filter(const SurvivalData& data, double threshold, ZScoreReport* report,
                           const std::vector<bool>& screened = {});

// Columns with variance < 1e-10 or fewer than `min_nonzero` nonzero entries.
std::vector<std::string> near_zero_variance(const SurvivalData& data, int min_nonzero = 5);

// VIF_j = 1 / (1 - R^2_j), regressing column j on the others plus intercept.
// Perfect collinearity yields +inf.
Eigen::VectorXd variance_inflation(const Eigen::MatrixXd& x);

struct VifStep {
  std::string dropped;
  double vif = 0;
};

struct VifResult {
  std::vector<std::string> kept;
  std::map<std::string, double> vif;        // final VIFs of kept columns
  std::map<std::string, double> initial_vif;
  std::vector<VifStep> dropped;
};

// Iteratively drops the largest VIF above `threshold`; among equal VIFs the
// later column goes, so the earlier one in covariate order is kept.
VifResult vif_screen(const SurvivalData& data, double threshold = 5.0);

// ---- Cox partial likelihood --------------------------------------------------

struct CoxDerivatives {
  double loglik = 0;
  Eigen::VectorXd score;        // gradient of loglik
  Eigen::MatrixXd information;  // negative Hessian
};

CoxDerivatives cox_derivatives(const SurvivalData& data, const Eigen::VectorXd& beta,
                               Ties ties);
double log_partial_likelihood(const SurvivalData& data, const Eigen::VectorXd& beta,
                              Ties ties);

struct CoxOptions {
  Ties ties = Ties::kEfron;
  double tol = 1e-8;
  int max_iter = 100;
  double separation_bound = 15;
  // Baseline interval boundaries c_0 < ... < c_K; default_cuts() when empty.
  std::vector<double> baseline_cuts;
};

struct TestStatistic {
  double statistic = 0;
  int df = 0;
  double p = 1;
};

struct BaselineInterval {
  double lower = 0;  // c_{k-1}
  double upper = 0;  // c_k
  double log_hazard = 0;
};

struct CoxFit {
  std::vector<std::string> covariate_names;
  Eigen::VectorXd beta;
  Eigen::VectorXd exp_beta;
  Eigen::VectorXd se;
  Eigen::VectorXd z;
  Eigen::VectorXd p;
  Eigen::MatrixXd information;  // at beta-hat
  double loglik_null = 0;
  double loglik_fit = 0;
  TestStatistic lr;
  TestStatistic wald;
  TestStatistic score;
  std::vector<BaselineInterval> baseline;
  bool converged = false;
  int iterations = 0;
  Ties ties = Ties::kEfron;
  std::string diagnostic;
  std::vector<std::string> warnings;
};

// Newton-Raphson with step halving from beta = 0.
CoxFit fit_cox_tvc(const SurvivalData& data, const CoxOptions& options = {});

struct ModelTests {
  TestStatistic lr;
  TestStatistic wald;
  TestStatistic score;
};

// Throws NonConvergenceError for a non-converged fit.
ModelTests model_tests(const CoxFit& fit);

// Interior cuts at deciles of observed event times, bracketed by the
// smallest start and largest stop.
std::vector<double> default_cuts(const SurvivalData& data);

// ---- piecewise exponential ---------------------------------------------------

struct PweFit {
  std::vector<std::string> covariate_names;
  std::vector<double> cuts;
  Eigen::VectorXd beta;
  Eigen::VectorXd se_beta;
  Eigen::VectorXd log_hazard;     // a_k; -inf for intervals without events
  Eigen::VectorXd se_log_hazard;  // NaN where a_k = -inf
  Eigen::VectorXd events;
  Eigen::VectorXd exposure;
  double loglik = 0;
  bool converged = false;
  int iterations = 0;
  std::string diagnostic;
};

struct PweOptions {
  double tol = 1e-8;
  int max_iter = 100;
  double separation_bound = 15;
};

PweFit fit_piecewise_exponential(const SurvivalData& data, const std::vector<double>& cuts,
                                 const PweOptions& options = {});

// Full log-likelihood of the piecewise model at the given parameters.
double pwe_log_likelihood(const SurvivalData& data, const std::vector<double>& cuts,
                          const Eigen::VectorXd& log_hazard, const Eigen::VectorXd& beta);

// ---- hazard curve ------------------------------------------------------------

struct NelsonAalenStep {
  double time = 0;
  int events = 0;
  int at_risk = 0;
  double increment = 0;  // events / at_risk
};

std::vector<NelsonAalenStep> nelson_aalen(const SurvivalData& data);

struct HazardPoint {
  double t = 0;
  double hazard = 0;
};

// 1.5 x median gap between distinct event times (1 month with < 2 times).
double default_bandwidth(const std::vector<NelsonAalenStep>& steps);

// Epanechnikov-smoothed Nelson-Aalen increments, reflected at t = 0, on a
// grid from 0 to the largest stop time. Empty when there are no events.
std::vector<HazardPoint> smoothed_hazard(const SurvivalData& data,
                                         std::optional<double> bandwidth = std::nullopt,
                                         double grid_step = 0.25);

}  // namespace commitgate
