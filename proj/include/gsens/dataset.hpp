#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gsens {

enum class WeightMethod { entropy, ipw_logistic, uniform, external };
enum class EstimatorStyle { dim, ht, hajek, augmented };
enum class Sigma2Assumption { none, cov_y0_tau_nonneg, po_corr_nonneg, po_corr_negative };
enum class AnalysisMode { weighted, augmented };

std::string to_string(WeightMethod m);
std::string to_string(EstimatorStyle s);
std::string to_string(Sigma2Assumption a);
std::string to_string(AnalysisMode m);
WeightMethod weight_method_from_string(const std::string& s);
EstimatorStyle estimator_style_from_string(const std::string& s);
Sigma2Assumption sigma2_assumption_from_string(const std::string& s);
AnalysisMode analysis_mode_from_string(const std::string& s);

// Experimental sample: covariates, binary treatment, observed outcome.
// Immutable after validation; all modules take it by const reference.
struct ExperimentalSample {
  Eigen::MatrixXd covariates;  // n x p
  Eigen::VectorXd treatment;   // entries exactly 0 or 1
  Eigen::VectorXd outcome;
  std::vector<std::string> covariate_names;
  std::optional<Eigen::VectorXd> external_weights;  // raw, pre-normalization

  Eigen::Index n() const { return covariates.rows(); }
  Eigen::Index p() const { return covariates.cols(); }
  Eigen::Index n_treated() const { return static_cast<Eigen::Index>(treatment.sum()); }
  Eigen::Index n_control() const { return n() - n_treated(); }

  Eigen::VectorXd treated_outcomes() const;
  Eigen::VectorXd control_outcomes() const;

  void validate() const;  // throws gsens::Error on any invariant violation
};

struct TargetPopulation {
  Eigen::MatrixXd covariates;  // N x p
  std::vector<std::string> covariate_names;

  Eigen::Index n() const { return covariates.rows(); }
  Eigen::Index p() const { return covariates.cols(); }

  void validate() const;
};

struct AnalysisConfig {
  WeightMethod weight_method = WeightMethod::entropy;
  EstimatorStyle estimator = EstimatorStyle::ht;
  AnalysisMode mode = AnalysisMode::weighted;
  double q = 1.0;
  Sigma2Assumption sigma2_assumption = Sigma2Assumption::none;
  std::optional<double> sigma2_override;
  int grid_r2 = 400;
  int grid_rho = 400;
  std::uint64_t seed = 0;

  void validate() const;
};

// Column-aligned pair of datasets plus the run configuration.
struct AnalysisInput {
  ExperimentalSample sample;
  TargetPopulation population;
  AnalysisConfig config;
  // Covariates constant in both datasets (flagged at align time).
  std::vector<std::string> constant_in_both;
};

struct ColumnSchema {
  std::string treatment_col;
  std::string outcome_col;
  std::string weights_col;  // optional external weights
};

enum class DatasetRole { sample, population };

ExperimentalSample load_sample(const std::string& path, const ColumnSchema& schema);
TargetPopulation load_population(const std::string& path);

void write_sample_csv(const std::string& path, const ExperimentalSample& s);
void write_population_csv(const std::string& path, const TargetPopulation& p);

AnalysisInput align(const ExperimentalSample& sample, const TargetPopulation& population,
                    const AnalysisConfig& config);

// key=value configuration file; unknown keys are an error.
AnalysisConfig parse_config_file(const std::string& path);
AnalysisConfig parse_config_text(const std::string& text);

}  // namespace gsens
