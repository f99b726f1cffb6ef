#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "gsens/dataset.hpp"
#include "gsens/estimators.hpp"
#include "gsens/weights.hpp"

namespace gsens {

// Three-parameter bias decomposition inputs. In weighted mode sigma2 is the
// individual-effect variance; in augmented mode it is the residual-effect
// variance and rho the weight-error/model-residual correlation.
struct SensitivityParams {
  double r2_eps = 0;
  double rho = 0;
  double sigma2 = 0;
  double var_w = 0;
  std::optional<double> var_w_star;  // required on the r2_eps = 1 branch
};

// rho * sqrt(var_w * r2/(1-r2) * sigma2); at r2 = 1, rho * sqrt(var_w* * sigma2).
double bias_weighted(const SensitivityParams& params);
double bias_augmented(const SensitivityParams& params);

struct VarianceBounds {
  double lower = 0;
  double upper = 0;
  Sigma2Assumption assumption = Sigma2Assumption::none;
  double var_y1 = 0;
  double var_y0 = 0;
  double mean_tau = 0;
};

// Sharp bounds on the individual-effect variance from extremal couplings of
// the empirical arm distributions (comonotone lower, antimonotone upper),
// optionally tightened by a directional assumption.
VarianceBounds sigma_tau_bounds(const Eigen::VectorXd& treated_outcomes,
                                const Eigen::VectorXd& control_outcomes,
                                Sigma2Assumption assumption);

// Variance of tau under an explicit coupling (pairing of quantile slabs);
// exposed for the random-coupling containment property.
double coupling_variance(const Eigen::VectorXd& treated_outcomes,
                         const Eigen::VectorXd& control_outcomes,
                         const std::vector<Eigen::Index>& pairing);

struct XiStats {
  double var_tau_hat = 0;
  double cov_tauhat_xi = 0;
  double sigma2_xi_max = 0;
  bool clamped = false;
};

XiStats sigma_xi_bound(double sigma2_tau_max, const TauModel& model,
                       const ExperimentalSample& sample);

struct CorEstimate {
  double value = 0;
  bool clamped = false;
  bool degenerate = false;  // constant weights: 0 by convention
};

// Arm-split conservative estimate of cor(w, tau):
// [cov(w,Y|T=1) - cov(w,Y|T=0)] / sqrt(sigma2 * var(w)), clamped to [-1,1].
CorEstimate cor_w_tau_hat(const ExperimentalSample& sample, const WeightSet& weights,
                          double sigma2);

// Same device applied to an arbitrary vector (used for leave-one-out errors).
CorEstimate arm_split_cor(const ExperimentalSample& sample, const Eigen::VectorXd& v,
                          double sigma2);

// sqrt(1 - cor^2): half-width of the feasible correlation range.
double rho_bound(double cor_w_tau);

// RV_q = (sqrt(a^2 + 4a) - a)/2 with a = q^2 est^2 / (sigma2 var_w).
double robustness_value(double estimate, double q, double sigma2, double var_w);

struct ExtremeScenario {
  double rho_max = 0;
  double r2_max = 0;        // default bound 1 - cor^2
  double r2_max_minus = 0;  // second root when cor(w*,tau) is supplied
  bool has_two_roots = false;
  double bias_max = 0;
};

ExtremeScenario extreme_scenario(double cor_w_tau, std::optional<double> cor_wstar_tau,
                                 double sigma2, double var_w);

// |1 - sqrt(1-r2) * cor(w,tau)/cor(w*,tau)|.
double relative_reduction(double r2_eps, double cor_w_tau, double cor_wstar_tau);

struct BenchmarkPoint {
  double r2 = 0;
  double rho = 0;
  std::string label;
};

enum class KillerCriterion { reduce, sign_flip };

struct GridConfig {
  int n_r2 = 400;
  int n_rho = 400;
  double r2_cap = 0.99;
};

struct ContourGrid {
  Eigen::VectorXd r2_axis;
  Eigen::VectorXd rho_axis;
  Eigen::MatrixXd bias;  // n_rho x n_r2, row i = rho_axis[i]
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> killer_mask;
  std::vector<BenchmarkPoint> benchmark_points;
  double estimate = 0;
  double q = 1;
};

ContourGrid killer_region(double estimate, double q, double sigma2, double var_w,
                          double rho_bound_value, const GridConfig& grid,
                          const std::vector<BenchmarkPoint>& benchmark_points,
                          KillerCriterion criterion = KillerCriterion::reduce);

struct SensitivitySummary {
  double estimate = 0;
  double q = 1;
  double rv = 0;
  double cor_w_tau_hat = 0;
  double rho_bound = 1;
  double sigma2_max = 0;
  double var_w = 0;
  AnalysisMode mode = AnalysisMode::weighted;
  bool cor_clamped = false;
  bool cor_degenerate = false;
  bool sigma2_clamped = false;
};

// Assemble the headline sensitivity statistics for one estimate.
SensitivitySummary summarize_sensitivity(const ExperimentalSample& sample,
                                         const WeightSet& weights, double estimate,
                                         double q, double sigma2_max, AnalysisMode mode,
                                         const TauModel* model = nullptr);

}  // namespace gsens
