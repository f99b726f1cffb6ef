#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>

#include "gsens/dataset.hpp"
#include "gsens/weights.hpp"

namespace gsens {

struct PateEstimate {
  double value = 0;
  EstimatorStyle style = EstimatorStyle::ht;
  Eigen::Index n1 = 0;
  Eigen::Index n0 = 0;
};

// Individual-level treatment effect model interface.
class TauModel {
 public:
  virtual ~TauModel() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& covariates) const = 0;
};

// Identically-zero model; augmented estimator reduces to the weighted one.
class ZeroTauModel final : public TauModel {
 public:
  Eigen::VectorXd predict(const Eigen::MatrixXd& covariates) const override {
    return Eigen::VectorXd::Zero(covariates.rows());
  }
};

// T-learner with per-arm OLS (intercept + covariates).
class LinearTauModel final : public TauModel {
 public:
  LinearTauModel(Eigen::VectorXd treated_coef, Eigen::VectorXd control_coef)
      : treated_coef_(std::move(treated_coef)), control_coef_(std::move(control_coef)) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& covariates) const override;
  const Eigen::VectorXd& treated_coef() const { return treated_coef_; }
  const Eigen::VectorXd& control_coef() const { return control_coef_; }

 private:
  Eigen::VectorXd treated_coef_;  // [intercept, slopes]
  Eigen::VectorXd control_coef_;
};

PateEstimate sate_dim(const ExperimentalSample& sample);

PateEstimate weighted_pate(const ExperimentalSample& sample, const WeightSet& weights,
                           EstimatorStyle style);

LinearTauModel fit_linear_tau_model(const ExperimentalSample& sample);

// tau_hat_W(ht) - (1/n) sum_S w_i tau(X_i) + (1/N) sum_P tau(X_i).
PateEstimate augmented_pate(const ExperimentalSample& sample,
                            const TargetPopulation& population, const WeightSet& weights,
                            const TauModel& model);

struct BootstrapResult {
  double point = 0;
  double lower = 0;
  double upper = 0;
  int replicates = 0;
  std::uint64_t seed = 0;
  int failed = 0;
};

// Percentile bootstrap resampling both datasets independently, refitting
// weights per replicate; fully determined by the seed.
BootstrapResult bootstrap_interval(const AnalysisInput& input, EstimatorStyle style,
                                   int replicates, std::uint64_t seed);

}  // namespace gsens
