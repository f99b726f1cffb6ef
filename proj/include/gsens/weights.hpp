#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gsens/dataset.hpp"

namespace gsens {

// Mean-one sample selection weights plus fit provenance.
struct WeightSet {
  Eigen::VectorXd values;  // length n, strictly positive, mean 1 within 1e-10
  WeightMethod method = WeightMethod::uniform;
  bool converged = true;
  int iterations = 0;
  Eigen::VectorXd dual_or_coef;  // entropy dual parameters or logistic coefficients

  void validate() const;
};

struct EntropyOptions {
  int max_iterations = 200;
  double balance_tol = 1e-8;  // max standardized constraint violation
  const Eigen::VectorXd* warm_start = nullptr;  // dual parameters, original scale
};

// Entropy balancing: minimize sum w_i log w_i subject to
// (1/n) sum_i w_i x_ij = population mean_j and mean(w) = 1.
// Newton iterations on the exponential-tilting dual with backtracking.
WeightSet entropy_balance(const Eigen::MatrixXd& sample_covariates,
                          const Eigen::VectorXd& population_means,
                          const EntropyOptions& opts = {});

struct IpwOptions {
  int max_iterations = 100;
  double coef_tol = 1e-10;
};

// Logistic-regression IPW: fit S ~ covariates on the stacked design
// (sample S=1, population S=0) by IRLS; weights are renormalized odds.
WeightSet ipw_logistic(const Eigen::MatrixXd& sample_covariates,
                       const Eigen::MatrixXd& population_covariates,
                       const IpwOptions& opts = {});

WeightSet uniform_weights(Eigen::Index n);
// User-supplied weights, renormalized to mean 1.
WeightSet external_weights(const Eigen::VectorXd& values);

// Fit weights per the input's configured method.
WeightSet fit_weights(const AnalysisInput& input);

struct BalanceRow {
  std::string covariate;
  double sample_mean = 0;
  double weighted_mean = 0;
  double population_mean = 0;
  double std_diff = 0;
  double weighted_std_diff = 0;
  bool zero_variance = false;
};

// Standardized differences use the unweighted sample sd as denominator;
// zero-variance covariates report 0 with a flag.
std::vector<BalanceRow> balance_table(const ExperimentalSample& sample,
                                      const TargetPopulation& population,
                                      const WeightSet& weights);

}  // namespace gsens
