#pragma once

#include <Eigen/Dense>

namespace gsens::stats {

// Moment helpers. All variances and covariances are plug-in (divide by n),
// matching the population-style moments used throughout the bias algebra.

inline double mean(const Eigen::VectorXd& x) { return x.mean(); }

inline double var(const Eigen::VectorXd& x) {
  const double m = x.mean();
  return (x.array() - m).square().sum() / static_cast<double>(x.size());
}

inline double sd(const Eigen::VectorXd& x) { return std::sqrt(var(x)); }

inline double cov(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double mx = x.mean();
  const double my = y.mean();
  return ((x.array() - mx) * (y.array() - my)).sum() /
         static_cast<double>(x.size());
}

inline double cor(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double sx = sd(x);
  const double sy = sd(y);
  if (sx == 0.0 || sy == 0.0) return 0.0;
  return cov(x, y) / (sx * sy);
}

// Weighted mean with weights normalized to mean 1 over the sample:
// (1/n) sum w_i x_i.
inline double weighted_mean(const Eigen::VectorXd& w, const Eigen::VectorXd& x) {
  return (w.array() * x.array()).sum() / static_cast<double>(x.size());
}

}  // namespace gsens::stats
