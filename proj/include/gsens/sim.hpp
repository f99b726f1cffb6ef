#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gsens/dataset.hpp"

namespace gsens {

enum class ConfounderKind { bernoulli, gaussian };

// Synthetic DGP with one omitted confounder U.
//
// X_j are independent standard Gaussians truncated to |x| <= 3. Selection is
// logistic in X alone: P(S=1|X) = sigmoid(sel_intercept + sel_x'X), so the
// X-only weight model is correctly specified. U is drawn conditional on
// (X, S): bernoulli kind uses a logistic link in (X, S), gaussian kind a
// linear mean in (X, S) with unit noise. Outcomes are linear in (X, U) with
// arm-specific coefficients. This factorization keeps the ideal weights
// w* = w(X) * P(U|X, S=0)/P(U|X, S=1) available in closed form.
struct DgpConfig {
  Eigen::Index n = 2000;       // sample size (fixed by rejection sampling)
  Eigen::Index N = 10000;      // population size
  int p = 2;

  double sel_intercept = 0;
  Eigen::VectorXd sel_x;       // length p

  ConfounderKind u_kind = ConfounderKind::bernoulli;
  double u_intercept = 0;
  Eigen::VectorXd u_x;         // length p
  double u_s = 0;              // shift of U's conditional law between S=1 and S=0

  // Outcome: Y(t) = out_intercept[t] + out_x[t]'X + out_u[t]*U + noise_sd*e.
  double out_intercept1 = 0, out_intercept0 = 0;
  Eigen::VectorXd out_x1, out_x0;  // length p
  double out_u1 = 0, out_u0 = 0;
  double noise_sd = 1;

  std::uint64_t seed = 0;

  void validate() const;  // positivity: selection probabilities in (0.01, 0.99)
};

DgpConfig parse_dgp_config_text(const std::string& text);
DgpConfig parse_dgp_config_file(const std::string& path);

// One generated replication with everything the oracle needs.
struct SimData {
  ExperimentalSample sample;
  TargetPopulation population;
  Eigen::VectorXd sample_u;
  Eigen::VectorXd population_u;
  Eigen::VectorXd true_w;        // exact w(X) on the sample, scale-exact
  Eigen::VectorXd true_w_star;   // exact w*(X, U) on the sample
  Eigen::VectorXd sample_tau;    // Y(1) - Y(0), both arms revealed to the oracle
  Eigen::VectorXd population_tau;
  double pate = 0;               // population-mean tau for this draw
};

SimData generate(const DgpConfig& config, std::uint64_t replication = 0);

struct OracleCheck {
  std::string name;
  double analytic = 0;
  double empirical = 0;
  double tolerance = 0;
  bool pass = false;
};

struct OracleReport {
  std::vector<OracleCheck> checks;
  int replications = 0;
  int failed_replications = 0;
  bool all_pass() const;
};

// Brute-force verification of the decomposition identities and bounds:
// the pointwise weight-error identity, the variance decomposition and
// orthogonality of (w, eps), the bias formula for the weighted estimator,
// the correlation bound, the augmented-estimator bias with a misspecified
// model, the balance conditions for entropy weights, and the linear
// omitted-variable special case. Throws if more than 1% of replications
// fail to converge.
OracleReport oracle_verify(const DgpConfig& config, int replications);

std::string format_oracle_report(const OracleReport& report);

}  // namespace gsens
