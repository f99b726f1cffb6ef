#include "gsens/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gsens/error.hpp"
#include "gsens/stats.hpp"

namespace gsens {

namespace {

std::vector<Eigen::Index> kept_columns(const ExperimentalSample& sample,
                                       const std::vector<std::string>& dropped) {
  if (dropped.empty()) throw Error("loo_error: empty covariate subset");
  for (const auto& nm : dropped) {
    if (std::find(sample.covariate_names.begin(), sample.covariate_names.end(), nm) ==
        sample.covariate_names.end())
      throw Error("loo_error: unknown covariate '" + nm + "'");
  }
  std::vector<Eigen::Index> kept;
  for (Eigen::Index j = 0; j < sample.p(); ++j) {
    const auto& nm = sample.covariate_names[static_cast<std::size_t>(j)];
    if (std::find(dropped.begin(), dropped.end(), nm) == dropped.end()) kept.push_back(j);
  }
  if (kept.empty())
    throw Error("loo_error: subset equals the full covariate set");
  return kept;
}

Eigen::MatrixXd select_cols(const Eigen::MatrixXd& m,
                            const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = m.col(cols[k]);
  return out;
}

}  // namespace

LooError loo_error(const ExperimentalSample& sample, const TargetPopulation& population,
                   const WeightSet& weights, const std::vector<std::string>& columns,
                   const std::string& label, double sigma2, WeightMethod method,
                   AnalysisMode mode, const TauModel* model) {
  const auto kept = kept_columns(sample, columns);
  const Eigen::MatrixXd xs = select_cols(sample.covariates, kept);
  const Eigen::MatrixXd xp = select_cols(population.covariates, kept);

  WeightSet refit;
  if (method == WeightMethod::entropy) {
    EntropyOptions opts;
    Eigen::VectorXd warm;
    if (weights.method == WeightMethod::entropy &&
        weights.dual_or_coef.size() == sample.p()) {
      warm.resize(static_cast<Eigen::Index>(kept.size()));
      for (std::size_t k = 0; k < kept.size(); ++k)
        warm[static_cast<Eigen::Index>(k)] = weights.dual_or_coef[kept[k]];
      opts.warm_start = &warm;
    }
    refit = entropy_balance(xs, xp.colwise().mean(), opts);
  } else if (method == WeightMethod::ipw_logistic) {
    refit = ipw_logistic(xs, xp);
  } else {
    throw Error("loo_error: benchmarking needs a refittable weight method "
                "(entropy or ipw_logistic)");
  }

  LooError loo;
  loo.label = label;
  loo.columns = columns;
  loo.eps = refit.values - weights.values;
  loo.var_eps = stats::var(loo.eps);
  const double var_w = stats::var(weights.values);
  if (!(var_w > 0.0)) throw Error("loo_error: full-fit weights have zero variance");
  loo.r2_loo = loo.var_eps / var_w;
  loo.refit_converged = refit.converged;

  if (mode == AnalysisMode::augmented) {
    if (!model) throw Error("loo_error: augmented mode needs a tau model");
    ExperimentalSample reduced = sample;
    reduced.covariates = xs;
    reduced.covariate_names.clear();
    for (auto j : kept)
      reduced.covariate_names.push_back(
          sample.covariate_names[static_cast<std::size_t>(j)]);
    const LinearTauModel model_loo = fit_linear_tau_model(reduced);
    const Eigen::VectorXd xi_shift =
        model->predict(sample.covariates) - model_loo.predict(xs);
    loo.rho_loo = stats::cor(loo.eps, xi_shift);
  } else {
    const CorEstimate c = arm_split_cor(sample, loo.eps, sigma2);
    loo.rho_loo = c.value;
    loo.rho_clamped = c.clamped;
  }
  return loo;
}

std::pair<double, double> benchmark_transform(double r2_loo, double rho_loo,
                                              double k_sigma, double k_rho,
                                              bool* clamped) {
  if (k_sigma < 0.0) throw Error("benchmark_transform: k_sigma must be nonnegative");
  if (r2_loo < 0.0) throw Error("benchmark_transform: negative r2_loo");
  const double r2 = k_sigma * r2_loo / (1.0 + k_sigma * r2_loo);
  double rho = k_rho * rho_loo;
  bool cl = false;
  if (rho > 1.0) {
    rho = 1.0;
    cl = true;
  } else if (rho < -1.0) {
    rho = -1.0;
    cl = true;
  }
  if (clamped) *clamped = cl;
  return {r2, rho};
}

double mrcs(double estimate, double bias_at_k1, bool* unbounded) {
  if (bias_at_k1 == 0.0) {
    if (unbounded) *unbounded = true;
    return std::numeric_limits<double>::infinity();
  }
  if (unbounded) *unbounded = false;
  return estimate / bias_at_k1;
}

KMin k_min(double rv, double r2_bench_at_k1, double rho_bench_at_k1,
           bool exact_inversion, double r2_loo) {
  if (!(rv > 0.0 && rv < 1.0)) throw Error("k_min: rv must be in (0,1)");
  KMin k;
  if (exact_inversion) {
    if (r2_loo == 0.0) {
      k.unbounded_sigma = true;
      k.k_sigma_min = std::numeric_limits<double>::infinity();
    } else {
      k.k_sigma_min = rv / (r2_loo * (1.0 - rv));
    }
  } else if (r2_bench_at_k1 == 0.0) {
    k.unbounded_sigma = true;
    k.k_sigma_min = std::numeric_limits<double>::infinity();
  } else {
    k.k_sigma_min = rv / r2_bench_at_k1;
  }
  if (rho_bench_at_k1 == 0.0) {
    k.unbounded_rho = true;
    k.k_rho_min = std::numeric_limits<double>::infinity();
  } else {
    k.k_rho_min = std::sqrt(rv) / rho_bench_at_k1;
  }
  return k;
}

BenchmarkResult calibrate(const LooError& loo, double estimate, double q, double sigma2,
                          double var_w, double rv, const BenchmarkOptions& opts) {
  BenchmarkResult r;
  r.label = loo.label;
  r.r2_loo = loo.r2_loo;
  r.rho_loo = loo.rho_loo;
  r.k_sigma = opts.k_sigma;
  r.k_rho = opts.k_rho;
  r.refit_converged = loo.refit_converged;

  auto [r2, rho] = benchmark_transform(loo.r2_loo, loo.rho_loo, opts.k_sigma, opts.k_rho,
                                       &r.rho_bench_clamped);
  r.r2_bench = r2;
  r.rho_bench = rho;

  SensitivityParams p;
  p.r2_eps = r2;
  p.rho = rho;
  p.sigma2 = sigma2;
  p.var_w = var_w;
  r.bias = opts.mode == AnalysisMode::augmented ? bias_augmented(p) : bias_weighted(p);

  auto [r2_k1, rho_k1] = benchmark_transform(loo.r2_loo, loo.rho_loo, 1.0, 1.0);
  p.r2_eps = r2_k1;
  p.rho = rho_k1;
  const double bias_k1 =
      opts.mode == AnalysisMode::augmented ? bias_augmented(p) : bias_weighted(p);
  r.mrcs = mrcs(estimate, bias_k1, &r.mrcs_unbounded);

  const KMin k = k_min(rv, r2_k1, rho_k1, opts.exact_inversion, loo.r2_loo);
  r.k_sigma_min = k.k_sigma_min;
  r.k_rho_min = k.k_rho_min;
  r.k_min_unbounded = k.unbounded_sigma || k.unbounded_rho;
  (void)q;
  return r;
}

std::vector<BenchmarkResult> benchmark_table(const ExperimentalSample& sample,
                                             const TargetPopulation& population,
                                             const WeightSet& weights, double estimate,
                                             double q, double sigma2, double rv,
                                             const BenchmarkOptions& opts,
                                             const TauModel* model) {
  std::vector<std::pair<std::string, std::vector<std::string>>> requests;
  for (const auto& nm : sample.covariate_names) requests.push_back({nm, {nm}});
  for (const auto& s : opts.subsets) requests.push_back(s);

  const double var_w = stats::var(weights.values);
  std::vector<BenchmarkResult> rows;
  std::string failures;
  int ok = 0;
  for (const auto& [label, cols] : requests) {
    try {
      const LooError loo = loo_error(sample, population, weights, cols, label, sigma2,
                                     weights.method, opts.mode, model);
      rows.push_back(calibrate(loo, estimate, q, sigma2, var_w, rv, opts));
      ++ok;
    } catch (const Error& e) {
      BenchmarkResult r;
      r.label = label;
      r.refit_converged = false;
      rows.push_back(r);
      failures += std::string(failures.empty() ? "" : "; ") + label + ": " + e.what();
    }
  }
  if (ok == 0)
    throw Error("benchmark_table: every covariate refit failed (" + failures + ")");
  return rows;
}

}  // namespace gsens
