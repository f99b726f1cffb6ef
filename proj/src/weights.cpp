#include "gsens/weights.hpp"

#include <cmath>
#include <sstream>

#include "gsens/error.hpp"
#include "gsens/stats.hpp"

namespace gsens {

void WeightSet::validate() const {
  if (values.size() == 0) throw Error("weights: empty");
  if (!values.allFinite()) throw Error("weights: non-finite value");
  if ((values.array() <= 0.0).any()) throw Error("weights: non-positive value");
  if (std::abs(values.mean() - 1.0) > 1e-10)
    throw Error("weights: mean differs from 1 beyond tolerance");
}

namespace {

struct Standardized {
  Eigen::MatrixXd x;       // centered and scaled columns
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
};

Standardized standardize(const Eigen::MatrixXd& x,
                         const std::vector<std::string>* names) {
  Standardized s;
  const Eigen::Index p = x.cols();
  s.center.resize(p);
  s.scale.resize(p);
  s.x.resize(x.rows(), p);
  for (Eigen::Index j = 0; j < p; ++j) {
    s.center[j] = x.col(j).mean();
    const double sd = stats::sd(x.col(j));
    if (sd == 0.0) {
      std::string nm = names ? (*names)[static_cast<std::size_t>(j)]
                             : ("#" + std::to_string(j));
      throw Error("zero-variance covariate '" + nm + "' in weight fit");
    }
    s.scale[j] = sd;
    s.x.col(j) = (x.col(j).array() - s.center[j]) / sd;
  }
  return s;
}

void check_rank(const Eigen::MatrixXd& xs, const std::vector<std::string>* names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
  qr.setThreshold(1e-10);
  if (qr.rank() == xs.cols()) return;
  // name the trailing pivot columns as the collinear ones
  std::string msg = "collinear covariates in weight fit:";
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = qr.rank(); k < xs.cols(); ++k) {
    const Eigen::Index j = perm[k];
    msg += " '" + (names ? (*names)[static_cast<std::size_t>(j)]
                         : ("#" + std::to_string(j))) + "'";
  }
  throw Error(msg);
}

}  // namespace

WeightSet entropy_balance(const Eigen::MatrixXd& sample_covariates,
                          const Eigen::VectorXd& population_means,
                          const EntropyOptions& opts) {
  const Eigen::Index n = sample_covariates.rows();
  const Eigen::Index p = sample_covariates.cols();
  if (population_means.size() != p)
    throw Error("entropy_balance: target mean length mismatch");
  if (n < 2) throw Error("entropy_balance: need at least 2 rows");
  if (!population_means.allFinite())
    throw Error("entropy_balance: non-finite target mean");

  WeightSet ws;
  ws.method = WeightMethod::entropy;
  if (p == 0) {
    ws.values = Eigen::VectorXd::Ones(n);
    ws.dual_or_coef = Eigen::VectorXd();
    return ws;
  }

  Standardized s = standardize(sample_covariates, nullptr);
  check_rank(s.x, nullptr);
  const Eigen::VectorXd target =
      (population_means - s.center).array() / s.scale.array();

  // dual objective g(l) = log mean exp(l'(x_i - target)); gradient is the
  // tilted mean imbalance, Hessian the tilted covariance
  Eigen::MatrixXd d = s.x.rowwise() - target.transpose();
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(p);
  if (opts.warm_start) {
    if (opts.warm_start->size() != p)
      throw Error("entropy_balance: warm start length mismatch");
    lambda = opts.warm_start->array() * s.scale.array();
  }

  auto objective = [&](const Eigen::VectorXd& l, Eigen::VectorXd& w) {
    Eigen::VectorXd z = d * l;
    const double zmax = z.maxCoeff();
    Eigen::VectorXd e = (z.array() - zmax).exp();
    const double se = e.sum();
    w = e / se * static_cast<double>(n);  // mean-one weights at this dual point
    return zmax + std::log(se / static_cast<double>(n));
  };

  // polish well past the contract tolerance so closed-form cases reproduce
  // to near machine precision
  const double polish_tol = std::min(opts.balance_tol, 1e-13);
  Eigen::VectorXd w(n);
  double g = objective(lambda, w);
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    Eigen::VectorXd grad = d.transpose() * w / static_cast<double>(n);
    if (grad.cwiseAbs().maxCoeff() <= polish_tol) break;
    Eigen::VectorXd wm = s.x.transpose() * w / static_cast<double>(n);
    Eigen::MatrixXd hess = s.x.transpose() * w.asDiagonal() * s.x /
                               static_cast<double>(n) -
                           wm * wm.transpose();
    hess.diagonal().array() += 1e-12;
    Eigen::VectorXd step = hess.ldlt().solve(-grad);
    double t = 1.0;
    Eigen::VectorXd wtrial(n);
    const double slope = grad.dot(step);
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const double gtrial = objective(lambda + t * step, wtrial);
      if (gtrial <= g + 1e-4 * t * slope) {
        lambda += t * step;
        g = gtrial;
        w = wtrial;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // no descent possible at machine precision
  }
  const double violation =
      (d.transpose() * w / static_cast<double>(n)).cwiseAbs().maxCoeff();
  const bool converged = violation <= opts.balance_tol;
  if (!converged)
    throw Error("entropy_balance: no convergence after " + std::to_string(it) +
                " iterations; target means may be infeasible "
                "(outside the sample convex hull)");

  ws.values = w;
  ws.converged = true;
  ws.iterations = it;
  ws.dual_or_coef = lambda.array() / s.scale.array();
  ws.validate();
  return ws;
}

WeightSet ipw_logistic(const Eigen::MatrixXd& sample_covariates,
                       const Eigen::MatrixXd& population_covariates,
                       const IpwOptions& opts) {
  const Eigen::Index n = sample_covariates.rows();
  const Eigen::Index N = population_covariates.rows();
  const Eigen::Index p = sample_covariates.cols();
  if (population_covariates.cols() != p)
    throw Error("ipw_logistic: covariate count mismatch");

  WeightSet ws;
  ws.method = WeightMethod::ipw_logistic;
  if (p == 0) {
    ws.values = Eigen::VectorXd::Ones(n);
    ws.dual_or_coef = Eigen::VectorXd::Zero(1);
    return ws;
  }

  Eigen::MatrixXd stacked(n + N, p);
  stacked.topRows(n) = sample_covariates;
  stacked.bottomRows(N) = population_covariates;
  Standardized s = standardize(stacked, nullptr);
  check_rank(s.x, nullptr);

  Eigen::MatrixXd design(n + N, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = s.x;
  Eigen::VectorXd y(n + N);
  y.head(n).setOnes();
  y.tail(N).setZero();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
  Eigen::VectorXd prob(n + N);
  int it = 0;
  bool converged = false;
  std::ostringstream trace;
  for (; it < opts.max_iterations; ++it) {
    Eigen::VectorXd eta = design * beta;
    prob = 1.0 / (1.0 + (-eta.array()).exp());
    Eigen::VectorXd irls_w = prob.array() * (1.0 - prob.array());
    irls_w = irls_w.cwiseMax(1e-12);
    Eigen::MatrixXd xtwx = design.transpose() * irls_w.asDiagonal() * design;
    Eigen::VectorXd score = design.transpose() * (y - prob);
    Eigen::VectorXd step = xtwx.ldlt().solve(score);
    beta += step;
    const double delta = step.cwiseAbs().maxCoeff();
    trace << "iter " << it + 1 << " max|dbeta|=" << delta << "\n";
    if (beta.cwiseAbs().maxCoeff() > 1e2)
      throw Error("ipw_logistic: coefficients diverging, "
                  "sample and population appear perfectly separable");
    if (delta <= opts.coef_tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw Error("ipw_logistic: IRLS did not converge in " +
                std::to_string(opts.max_iterations) + " iterations\n" + trace.str());

  Eigen::VectorXd eta = design.topRows(n) * beta;
  Eigen::VectorXd ps = 1.0 / (1.0 + (-eta.array()).exp());
  const double prior_odds =
      static_cast<double>(n) / static_cast<double>(N);
  Eigen::VectorXd w = prior_odds * (1.0 - ps.array()) / ps.array();
  w /= w.mean();

  ws.values = w;
  ws.converged = true;
  ws.iterations = it + 1;
  // report coefficients on the original covariate scale
  Eigen::VectorXd coef(p + 1);
  coef.tail(p) = beta.tail(p).array() / s.scale.array();
  coef[0] = beta[0] - (beta.tail(p).array() * s.center.array() / s.scale.array()).sum();
  ws.dual_or_coef = coef;
  ws.validate();
  return ws;
}

WeightSet uniform_weights(Eigen::Index n) {
  WeightSet ws;
  ws.method = WeightMethod::uniform;
  ws.values = Eigen::VectorXd::Ones(n);
  return ws;
}

WeightSet external_weights(const Eigen::VectorXd& values) {
  if (values.size() == 0) throw Error("external weights: empty");
  if (!values.allFinite() || (values.array() <= 0.0).any())
    throw Error("external weights must be positive and finite");
  WeightSet ws;
  ws.method = WeightMethod::external;
  ws.values = values / values.mean();
  ws.validate();
  return ws;
}

namespace {

// columns to use for fitting: everything not flagged constant in both datasets
std::vector<Eigen::Index> fit_columns(const AnalysisInput& input) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < input.sample.p(); ++j) {
    const auto& nm = input.sample.covariate_names[static_cast<std::size_t>(j)];
    bool skip = false;
    for (const auto& c : input.constant_in_both)
      if (c == nm) skip = true;
    if (!skip) cols.push_back(j);
  }
  return cols;
}

Eigen::MatrixXd select_cols(const Eigen::MatrixXd& m,
                            const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(cols[k]);
  return out;
}

}  // namespace

WeightSet fit_weights(const AnalysisInput& input) {
  switch (input.config.weight_method) {
    case WeightMethod::uniform:
      return uniform_weights(input.sample.n());
    case WeightMethod::external:
      if (!input.sample.external_weights)
        throw Error("external weight method requested but no weights column loaded");
      return external_weights(*input.sample.external_weights);
    case WeightMethod::entropy: {
      const auto cols = fit_columns(input);
      const Eigen::MatrixXd xs = select_cols(input.sample.covariates, cols);
      const Eigen::MatrixXd xp = select_cols(input.population.covariates, cols);
      return entropy_balance(xs, xp.colwise().mean());
    }
    case WeightMethod::ipw_logistic: {
      const auto cols = fit_columns(input);
      return ipw_logistic(select_cols(input.sample.covariates, cols),
                          select_cols(input.population.covariates, cols));
    }
  }
  throw Error("unknown weight method");
}

std::vector<BalanceRow> balance_table(const ExperimentalSample& sample,
                                      const TargetPopulation& population,
                                      const WeightSet& weights) {
  if (weights.values.size() != sample.n())
    throw Error("balance_table: weight length mismatch");
  if (population.p() != sample.p())
    throw Error("balance_table: datasets not aligned");
  std::vector<BalanceRow> rows;
  rows.reserve(static_cast<std::size_t>(sample.p()));
  for (Eigen::Index j = 0; j < sample.p(); ++j) {
    BalanceRow r;
    r.covariate = sample.covariate_names[static_cast<std::size_t>(j)];
    r.sample_mean = sample.covariates.col(j).mean();
    r.weighted_mean = stats::weighted_mean(weights.values, sample.covariates.col(j));
    r.population_mean = population.covariates.col(j).mean();
    const double sd = stats::sd(sample.covariates.col(j));
    if (sd == 0.0) {
      r.zero_variance = true;
      r.std_diff = 0.0;
      r.weighted_std_diff = 0.0;
    } else {
      r.std_diff = (r.sample_mean - r.population_mean) / sd;
      r.weighted_std_diff = (r.weighted_mean - r.population_mean) / sd;
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace gsens
