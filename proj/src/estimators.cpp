#include "gsens/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gsens/error.hpp"
#include "gsens/rng.hpp"
#include "gsens/stats.hpp"

namespace gsens {

Eigen::VectorXd LinearTauModel::predict(const Eigen::MatrixXd& covariates) const {
  if (covariates.cols() + 1 != treated_coef_.size())
    throw Error("tau model: covariate count mismatch");
  Eigen::VectorXd diff = treated_coef_ - control_coef_;
  return Eigen::VectorXd::Constant(covariates.rows(), diff[0]) +
         covariates * diff.tail(covariates.cols());
}

PateEstimate sate_dim(const ExperimentalSample& sample) {
  if (sample.n_treated() == 0 || sample.n_control() == 0)
    throw Error("sate_dim: empty treatment arm");
  PateEstimate est;
  est.style = EstimatorStyle::dim;
  est.n1 = sample.n_treated();
  est.n0 = sample.n_control();
  est.value = sample.treated_outcomes().mean() - sample.control_outcomes().mean();
  return est;
}

PateEstimate weighted_pate(const ExperimentalSample& sample, const WeightSet& weights,
                           EstimatorStyle style) {
  if (weights.values.size() != sample.n())
    throw Error("weighted_pate: weight length mismatch");
  if (style != EstimatorStyle::ht && style != EstimatorStyle::hajek)
    throw Error("weighted_pate: style must be ht or hajek");
  const Eigen::Index n1 = sample.n_treated();
  const Eigen::Index n0 = sample.n_control();
  double sw1 = 0, sw0 = 0, swy1 = 0, swy0 = 0;
  for (Eigen::Index i = 0; i < sample.n(); ++i) {
    const double w = weights.values[i];
    if (sample.treatment[i] == 1.0) {
      sw1 += w;
      swy1 += w * sample.outcome[i];
    } else {
      sw0 += w;
      swy0 += w * sample.outcome[i];
    }
  }
  PateEstimate est;
  est.style = style;
  est.n1 = n1;
  est.n0 = n0;
  if (style == EstimatorStyle::ht) {
    est.value = swy1 / static_cast<double>(n1) - swy0 / static_cast<double>(n0);
  } else {
    if (sw1 == 0.0 || sw0 == 0.0)
      throw Error("weighted_pate: zero total weight in an arm");
    est.value = swy1 / sw1 - swy0 / sw0;
  }
  return est;
}

namespace {

Eigen::VectorXd arm_ols(const ExperimentalSample& sample, double arm) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < sample.n(); ++i)
    if (sample.treatment[i] == arm) idx.push_back(i);
  const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
  const Eigen::Index p = sample.p();
  if (m < p + 1)
    throw Error("tau model: arm has fewer rows than coefficients");
  Eigen::MatrixXd design(m, p + 1);
  Eigen::VectorXd y(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    design(k, 0) = 1.0;
    design.row(k).tail(p) = sample.covariates.row(idx[static_cast<std::size_t>(k)]);
    y[k] = sample.outcome[idx[static_cast<std::size_t>(k)]];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p + 1)
    throw Error("tau model: rank-deficient design in arm " +
                std::to_string(static_cast<int>(arm)));
  return qr.solve(y);
}

}  // namespace

LinearTauModel fit_linear_tau_model(const ExperimentalSample& sample) {
  return LinearTauModel(arm_ols(sample, 1.0), arm_ols(sample, 0.0));
}

PateEstimate augmented_pate(const ExperimentalSample& sample,
                            const TargetPopulation& population, const WeightSet& weights,
                            const TauModel& model) {
  const PateEstimate base = weighted_pate(sample, weights, EstimatorStyle::ht);
  const Eigen::VectorXd tau_s = model.predict(sample.covariates);
  const Eigen::VectorXd tau_p = model.predict(population.covariates);
  if (!tau_s.allFinite() || !tau_p.allFinite())
    throw Error("augmented_pate: tau model produced non-finite predictions");
  PateEstimate est;
  est.style = EstimatorStyle::augmented;
  est.n1 = base.n1;
  est.n0 = base.n0;
  est.value = base.value - stats::weighted_mean(weights.values, tau_s) + tau_p.mean();
  return est;
}

namespace {

double percentile(std::vector<double>& sorted, double p) {
  const std::size_t m = sorted.size();
  const double h = p * static_cast<double>(m - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, m - 1);
  const double frac = h - std::floor(h);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

double one_estimate(const AnalysisInput& input, EstimatorStyle style) {
  const WeightSet w = fit_weights(input);
  if (style == EstimatorStyle::dim) return sate_dim(input.sample).value;
  if (style == EstimatorStyle::augmented) {
    const LinearTauModel model = fit_linear_tau_model(input.sample);
    return augmented_pate(input.sample, input.population, w, model).value;
  }
  return weighted_pate(input.sample, w, style).value;
}

}  // namespace

BootstrapResult bootstrap_interval(const AnalysisInput& input, EstimatorStyle style,
                                   int replicates, std::uint64_t seed) {
  if (replicates < 100) throw Error("bootstrap: need at least 100 replicates");
  BootstrapResult res;
  res.replicates = replicates;
  res.seed = seed;
  res.point = one_estimate(input, style);

  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(replicates));
  const Eigen::Index n = input.sample.n();
  const Eigen::Index N = input.population.n();
  for (int r = 0; r < replicates; ++r) {
    auto rng = make_stream(seed, static_cast<std::uint64_t>(r));
    std::uniform_int_distribution<Eigen::Index> ds(0, n - 1);
    std::uniform_int_distribution<Eigen::Index> dp(0, N - 1);
    AnalysisInput rep;
    rep.config = input.config;
    rep.constant_in_both = input.constant_in_both;
    rep.sample.covariate_names = input.sample.covariate_names;
    rep.sample.covariates.resize(n, input.sample.p());
    rep.sample.treatment.resize(n);
    rep.sample.outcome.resize(n);
    if (input.sample.external_weights)
      rep.sample.external_weights = Eigen::VectorXd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index k = ds(rng);
      rep.sample.covariates.row(i) = input.sample.covariates.row(k);
      rep.sample.treatment[i] = input.sample.treatment[k];
      rep.sample.outcome[i] = input.sample.outcome[k];
      if (rep.sample.external_weights)
        (*rep.sample.external_weights)[i] = (*input.sample.external_weights)[k];
    }
    rep.population.covariate_names = input.population.covariate_names;
    rep.population.covariates.resize(N, input.population.p());
    for (Eigen::Index i = 0; i < N; ++i)
      rep.population.covariates.row(i) = input.population.covariates.row(dp(rng));
    try {
      if (rep.sample.n_treated() < 2 || rep.sample.n_control() < 2)
        throw Error("bootstrap replicate: degenerate arm");
      values.push_back(one_estimate(rep, style));
    } catch (const Error&) {
      ++res.failed;
    }
  }
  if (res.failed * 20 > replicates)
    throw Error("bootstrap: " + std::to_string(res.failed) + " of " +
                std::to_string(replicates) + " replicate fits failed (over 5%)");
  std::sort(values.begin(), values.end());
  res.lower = percentile(values, 0.025);
  res.upper = percentile(values, 0.975);
  return res;
}

}  // namespace gsens
