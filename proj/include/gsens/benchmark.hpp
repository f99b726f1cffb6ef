#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gsens/dataset.hpp"
#include "gsens/estimators.hpp"
#include "gsens/sensitivity.hpp"
#include "gsens/weights.hpp"

namespace gsens {

// Leave-one-covariate-out refit statistics for one covariate (or named subset).
struct LooError {
  std::string label;
  std::vector<std::string> columns;
  Eigen::VectorXd eps;   // w_loo - w, on the full sample
  double var_eps = 0;
  double r2_loo = 0;     // var(eps)/var(w)
  double rho_loo = 0;
  bool rho_clamped = false;
  bool refit_converged = true;
};

// Calibrated sensitivity parameters implied by a benchmark covariate at
// multipliers (k_sigma, k_rho).
struct BenchmarkResult {
  std::string label;
  double r2_loo = 0;
  double rho_loo = 0;
  double k_sigma = 1;
  double k_rho = 1;
  double r2_bench = 0;
  double rho_bench = 0;
  bool rho_bench_clamped = false;
  double bias = 0;
  double mrcs = 0;          // estimate / bias at k_sigma = k_rho = 1
  double k_sigma_min = 0;   // multiplier putting r2_bench at the robustness value
  double k_rho_min = 0;     // multiplier putting |rho_bench| at sqrt(RV), signed
  bool mrcs_unbounded = false;   // benchmarked bias is exactly zero
  bool k_min_unbounded = false;  // zero loo statistic
  bool refit_converged = true;
};

struct BenchmarkOptions {
  double k_sigma = 1;
  double k_rho = 1;
  bool exact_inversion = false;  // k_sigma_min inverts the calibration map exactly
  AnalysisMode mode = AnalysisMode::weighted;
  // Named subsets benchmarked jointly in addition to single covariates.
  std::vector<std::pair<std::string, std::vector<std::string>>> subsets;
};

// Refit weights without the named covariate group; eps is the induced weight
// error w_loo - w. rho_loo is estimated against tau by the arm-split
// covariance device (weighted mode) or directly against the tau-model
// prediction shift tau(X) - tau(X without the group) (augmented mode).
LooError loo_error(const ExperimentalSample& sample, const TargetPopulation& population,
                   const WeightSet& weights, const std::vector<std::string>& columns,
                   const std::string& label, double sigma2, WeightMethod method,
                   AnalysisMode mode = AnalysisMode::weighted,
                   const TauModel* model = nullptr);

// r2_bench = k_s r2_loo / (1 + k_s r2_loo), rho_bench = k_r rho_loo
// clamped into the feasible range.
std::pair<double, double> benchmark_transform(double r2_loo, double rho_loo,
                                              double k_sigma, double k_rho,
                                              bool* clamped = nullptr);

// estimate / bias_at_k1, signed; unbounded flag when the bias is exactly zero.
double mrcs(double estimate, double bias_at_k1, bool* unbounded = nullptr);

struct KMin {
  double k_sigma_min = 0;
  double k_rho_min = 0;
  bool unbounded_sigma = false;
  bool unbounded_rho = false;
};

// Default (table-consistent) multipliers: rv / r2_bench and sqrt(rv) / rho_bench
// at k = 1. With exact_inversion, k_sigma_min instead solves the calibration
// map for r2_bench = rv: rv / (r2_loo (1 - rv)).
KMin k_min(double rv, double r2_bench_at_k1, double rho_bench_at_k1,
           bool exact_inversion = false, double r2_loo = 0);

// Map loo statistics to the sensitivity scale and attach bias, MRCS, k_min.
BenchmarkResult calibrate(const LooError& loo, double estimate, double q, double sigma2,
                          double var_w, double rv, const BenchmarkOptions& opts);

// Full benchmarking table over every covariate plus configured subsets.
// Covariates whose refit fails are reported unconverged, not dropped; if all
// refits fail this throws.
std::vector<BenchmarkResult> benchmark_table(const ExperimentalSample& sample,
                                             const TargetPopulation& population,
                                             const WeightSet& weights, double estimate,
                                             double q, double sigma2, double rv,
                                             const BenchmarkOptions& opts,
                                             const TauModel* model = nullptr);

}  // namespace gsens
