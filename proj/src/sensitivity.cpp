#include "gsens/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gsens/error.hpp"
#include "gsens/stats.hpp"

namespace gsens {

namespace {

double bias_impl(const SensitivityParams& p, const char* what) {
  if (p.rho < -1.0 || p.rho > 1.0) throw Error(std::string(what) + ": rho outside [-1,1]");
  if (p.sigma2 < 0.0) throw Error(std::string(what) + ": negative sigma2");
  if (p.r2_eps < 0.0 || p.r2_eps > 1.0)
    throw Error(std::string(what) + ": r2_eps outside [0,1]");
  if (p.r2_eps == 1.0) {
    if (!p.var_w_star)
      throw Error(std::string(what) +
                  ": r2_eps = 1 needs an explicit var_w_star (ideal-weight variance)");
    return p.rho * std::sqrt(*p.var_w_star * p.sigma2);
  }
  if (p.var_w < 0.0) throw Error(std::string(what) + ": negative var_w");
  return p.rho * std::sqrt(p.var_w * p.r2_eps / (1.0 - p.r2_eps) * p.sigma2);
}

}  // namespace

double bias_weighted(const SensitivityParams& params) {
  return bias_impl(params, "bias_weighted");
}

double bias_augmented(const SensitivityParams& params) {
  return bias_impl(params, "bias_augmented");
}

namespace {

// variance of F1^-1(u) - F0^-1(g(u)) over u in (0,1) for step quantile
// functions, with g either identity or the reflection 1-u; exact slab
// integration over merged breakpoints
double step_coupling_variance(const Eigen::VectorXd& y1_sorted,
                              const Eigen::VectorXd& y0_arranged) {
  const Eigen::Index n1 = y1_sorted.size();
  const Eigen::Index n0 = y0_arranged.size();
  double m2 = 0;
  double m1 = 0;
  Eigen::Index i = 0, j = 0;
  double u = 0;
  while (i < n1 && j < n0) {
    const double next1 = static_cast<double>(i + 1) / static_cast<double>(n1);
    const double next0 = static_cast<double>(j + 1) / static_cast<double>(n0);
    const double next = std::min(next1, next0);
    const double len = next - u;
    const double tau = y1_sorted[i] - y0_arranged[j];
    m2 += len * tau * tau;
    m1 += len * tau;
    u = next;
    if (next1 <= next) ++i;
    if (next0 <= next) ++j;
  }
  return m2 - m1 * m1;
}

}  // namespace

VarianceBounds sigma_tau_bounds(const Eigen::VectorXd& treated_outcomes,
                                const Eigen::VectorXd& control_outcomes,
                                Sigma2Assumption assumption) {
  if (treated_outcomes.size() == 0 || control_outcomes.size() == 0)
    throw Error("sigma_tau_bounds: empty arm");
  Eigen::VectorXd y1 = treated_outcomes;
  Eigen::VectorXd y0 = control_outcomes;
  std::sort(y1.data(), y1.data() + y1.size());
  std::sort(y0.data(), y0.data() + y0.size());

  VarianceBounds b;
  b.assumption = assumption;
  b.var_y1 = stats::var(y1);
  b.var_y0 = stats::var(y0);
  b.mean_tau = y1.mean() - y0.mean();
  b.lower = std::max(0.0, step_coupling_variance(y1, y0));
  Eigen::VectorXd y0_rev = y0.reverse();
  b.upper = std::max(0.0, step_coupling_variance(y1, y0_rev));

  switch (assumption) {
    case Sigma2Assumption::none:
      break;
    case Sigma2Assumption::cov_y0_tau_nonneg:
      if (b.var_y1 < b.var_y0)
        throw Error(
            "sigma_tau_bounds: var(Y1) < var(Y0) contradicts the nonnegative "
            "cov(Y0, tau) assumption (tightened upper bound would be negative)");
      b.upper = b.var_y1 - b.var_y0;
      break;
    case Sigma2Assumption::po_corr_nonneg:
      b.upper = b.var_y1 + b.var_y0;
      break;
    case Sigma2Assumption::po_corr_negative:
      b.lower = b.var_y1 + b.var_y0;
      break;
  }
  if (b.lower > b.upper)
    throw Error("sigma_tau_bounds: assumption produced lower > upper");
  return b;
}

double coupling_variance(const Eigen::VectorXd& treated_outcomes,
                         const Eigen::VectorXd& control_outcomes,
                         const std::vector<Eigen::Index>& pairing) {
  if (treated_outcomes.size() != control_outcomes.size())
    throw Error("coupling_variance: arms must have equal size");
  if (static_cast<Eigen::Index>(pairing.size()) != treated_outcomes.size())
    throw Error("coupling_variance: pairing length mismatch");
  Eigen::VectorXd tau(treated_outcomes.size());
  for (Eigen::Index i = 0; i < tau.size(); ++i)
    tau[i] = treated_outcomes[i] - control_outcomes[pairing[static_cast<std::size_t>(i)]];
  return stats::var(tau);
}

namespace {

// plug-in covariance of (a, b) restricted to one treatment arm
double arm_cov(const ExperimentalSample& sample, const Eigen::VectorXd& a,
               const Eigen::VectorXd& b, double arm) {
  double ma = 0, mb = 0;
  Eigen::Index m = 0;
  for (Eigen::Index i = 0; i < sample.n(); ++i)
    if (sample.treatment[i] == arm) {
      ma += a[i];
      mb += b[i];
      ++m;
    }
  ma /= static_cast<double>(m);
  mb /= static_cast<double>(m);
  double c = 0;
  for (Eigen::Index i = 0; i < sample.n(); ++i)
    if (sample.treatment[i] == arm) c += (a[i] - ma) * (b[i] - mb);
  return c / static_cast<double>(m);
}

}  // namespace

XiStats sigma_xi_bound(double sigma2_tau_max, const TauModel& model,
                       const ExperimentalSample& sample) {
  const Eigen::VectorXd tau_hat = model.predict(sample.covariates);
  if (!tau_hat.allFinite())
    throw Error("sigma_xi_bound: tau model produced non-finite predictions");
  XiStats x;
  x.var_tau_hat = stats::var(tau_hat);
  const double cov_tauhat_tau = arm_cov(sample, tau_hat, sample.outcome, 1.0) -
                                arm_cov(sample, tau_hat, sample.outcome, 0.0);
  x.cov_tauhat_xi = cov_tauhat_tau - x.var_tau_hat;
  x.sigma2_xi_max = sigma2_tau_max - x.var_tau_hat - 2.0 * x.cov_tauhat_xi;
  if (x.sigma2_xi_max < 0.0) {
    x.sigma2_xi_max = 0.0;
    x.clamped = true;
  }
  return x;
}

CorEstimate arm_split_cor(const ExperimentalSample& sample, const Eigen::VectorXd& v,
                          double sigma2) {
  if (!(sigma2 > 0.0)) throw Error("arm-split correlation: sigma2 must be positive");
  CorEstimate c;
  const double var_v = stats::var(v);
  if (var_v == 0.0) {
    c.degenerate = true;
    return c;
  }
  const double num = arm_cov(sample, v, sample.outcome, 1.0) -
                     arm_cov(sample, v, sample.outcome, 0.0);
  c.value = num / std::sqrt(sigma2 * var_v);
  if (c.value > 1.0) {
    c.value = 1.0;
    c.clamped = true;
  } else if (c.value < -1.0) {
    c.value = -1.0;
    c.clamped = true;
  }
  return c;
}

CorEstimate cor_w_tau_hat(const ExperimentalSample& sample, const WeightSet& weights,
                          double sigma2) {
  if (weights.values.size() != sample.n())
    throw Error("cor_w_tau_hat: weight length mismatch");
  return arm_split_cor(sample, weights.values, sigma2);
}

double rho_bound(double cor_w_tau) {
  const double c2 = std::min(cor_w_tau * cor_w_tau, 1.0);
  return std::sqrt(1.0 - c2);
}

double robustness_value(double estimate, double q, double sigma2, double var_w) {
  if (!(q > 0.0 && q <= 1.0)) throw Error("robustness_value: q must be in (0,1]");
  if (!(sigma2 > 0.0)) throw Error("robustness_value: sigma2 must be positive");
  if (!(var_w > 0.0))
    throw Error("robustness_value: var(w) must be positive "
                "(constant weights have no robustness value)");
  const double a = q * q * estimate * estimate / (sigma2 * var_w);
  if (a == 0.0) return 0.0;
  // same root as (sqrt(a^2+4a)-a)/2, written to avoid cancellation for large a
  return 2.0 * a / (std::sqrt(a * a + 4.0 * a) + a);
}

ExtremeScenario extreme_scenario(double cor_w_tau, std::optional<double> cor_wstar_tau,
                                 double sigma2, double var_w) {
  if (cor_w_tau < -1.0 || cor_w_tau > 1.0)
    throw Error("extreme_scenario: cor_w_tau outside [-1,1]");
  ExtremeScenario e;
  const double base = 1.0 - cor_w_tau * cor_w_tau;
  e.rho_max = std::sqrt(base);
  if (cor_wstar_tau && std::abs(*cor_wstar_tau) < 1.0) {
    const double c = *cor_wstar_tau;
    if (c < -1.0 || c > 1.0) throw Error("extreme_scenario: cor_wstar_tau outside [-1,1]");
    const double disc = std::sqrt((1.0 - c * c) * base);
    const double rp = cor_w_tau * c + disc;
    const double rm = cor_w_tau * c - disc;
    e.r2_max = 1.0 - rp * rp;
    e.r2_max_minus = 1.0 - rm * rm;
    e.has_two_roots = true;
  } else {
    e.r2_max = base;
    e.r2_max_minus = base;
  }
  const double r2 = e.r2_max;
  if (r2 >= 1.0) {
    e.bias_max = std::numeric_limits<double>::quiet_NaN();  // needs the R2=1 branch
  } else {
    SensitivityParams p;
    p.rho = e.rho_max;
    p.r2_eps = r2;
    p.sigma2 = sigma2;
    p.var_w = var_w;
    e.bias_max = bias_weighted(p);
  }
  return e;
}

double relative_reduction(double r2_eps, double cor_w_tau, double cor_wstar_tau) {
  if (cor_wstar_tau == 0.0)
    throw Error("relative_reduction: cor(w*, tau) must be nonzero");
  if (r2_eps < 0.0 || r2_eps > 1.0)
    throw Error("relative_reduction: r2_eps outside [0,1]");
  return std::abs(1.0 - std::sqrt(1.0 - r2_eps) * cor_w_tau / cor_wstar_tau);
}

namespace {

int sgn(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

ContourGrid killer_region(double estimate, double q, double sigma2, double var_w,
                          double rho_bound_value, const GridConfig& grid,
                          const std::vector<BenchmarkPoint>& benchmark_points,
                          KillerCriterion criterion) {
  if (grid.n_r2 < 2 || grid.n_rho < 2)
    throw Error("killer_region: grid resolution must be at least 2 per axis");
  if (!(grid.r2_cap > 0.0 && grid.r2_cap < 1.0))
    throw Error("killer_region: r2 cap must be in (0,1)");
  if (!(rho_bound_value >= 0.0 && rho_bound_value <= 1.0))
    throw Error("killer_region: rho bound outside [0,1]");

  ContourGrid g;
  g.estimate = estimate;
  g.q = q;
  g.benchmark_points = benchmark_points;
  g.r2_axis = Eigen::VectorXd::LinSpaced(grid.n_r2, 0.0, grid.r2_cap);
  g.rho_axis = Eigen::VectorXd::LinSpaced(grid.n_rho, -rho_bound_value, rho_bound_value);
  g.bias.resize(grid.n_rho, grid.n_r2);
  g.killer_mask.resize(grid.n_rho, grid.n_r2);
  const double reduce_slack = (1.0 - q) * std::abs(estimate);
  for (int i = 0; i < grid.n_rho; ++i) {
    SensitivityParams p;
    p.rho = g.rho_axis[i];
    p.sigma2 = sigma2;
    p.var_w = var_w;
    for (int j = 0; j < grid.n_r2; ++j) {
      p.r2_eps = g.r2_axis[j];
      const double b = bias_weighted(p);
      g.bias(i, j) = b;
      const double adj = estimate - b;
      const bool flipped = sgn(adj) != sgn(estimate);
      const bool reduced = std::abs(adj) <= reduce_slack;
      g.killer_mask(i, j) =
          criterion == KillerCriterion::sign_flip ? flipped : (flipped || reduced);
    }
  }
  return g;
}

SensitivitySummary summarize_sensitivity(const ExperimentalSample& sample,
                                         const WeightSet& weights, double estimate,
                                         double q, double sigma2_max, AnalysisMode mode,
                                         const TauModel* model) {
  SensitivitySummary s;
  s.estimate = estimate;
  s.q = q;
  s.mode = mode;
  s.sigma2_max = sigma2_max;
  s.var_w = stats::var(weights.values);

  CorEstimate cor;
  if (mode == AnalysisMode::augmented) {
    if (!model) throw Error("summarize_sensitivity: augmented mode needs a tau model");
    // cov(w, xi) = cov(w, tau) - cov(w, tau_hat); the first term by the
    // arm-split device, the second directly
    const double var_v = stats::var(weights.values);
    if (var_v == 0.0) {
      cor.degenerate = true;
    } else {
      const Eigen::VectorXd tau_hat = model->predict(sample.covariates);
      const double num = arm_cov(sample, weights.values, sample.outcome, 1.0) -
                         arm_cov(sample, weights.values, sample.outcome, 0.0) -
                         stats::cov(weights.values, tau_hat);
      cor.value = num / std::sqrt(sigma2_max * var_v);
      if (cor.value > 1.0) {
        cor.value = 1.0;
        cor.clamped = true;
      } else if (cor.value < -1.0) {
        cor.value = -1.0;
        cor.clamped = true;
      }
    }
  } else {
    cor = cor_w_tau_hat(sample, weights, sigma2_max);
  }
  s.cor_w_tau_hat = cor.value;
  s.cor_clamped = cor.clamped;
  s.cor_degenerate = cor.degenerate;
  s.rho_bound = rho_bound(cor.value);
  s.rv = robustness_value(estimate, q, sigma2_max, s.var_w);
  return s;
}

}  // namespace gsens
