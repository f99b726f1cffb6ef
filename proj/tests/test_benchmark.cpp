#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "gsens/benchmark.hpp"
#include "gsens/error.hpp"
#include "gsens/stats.hpp"
#include "helpers.hpp"

using namespace gsens;

namespace {

// entropy-friendly pair: binary x1 with a shifted target, x2 balanced within
// each x1 level so its constraint stays inactive
void inactive_pair(ExperimentalSample& s, TargetPopulation& pop) {
  const int n = 40;
  s.covariates.resize(n, 2);
  s.treatment.resize(n);
  s.outcome.resize(n);
  for (int i = 0; i < n; ++i) {
    s.covariates(i, 0) = i < n / 2 ? 1.0 : 0.0;
    s.covariates(i, 1) = (i % 2 == 0) ? 1.0 : -1.0;
    s.treatment[i] = (i % 2 == 0) ? 1.0 : 0.0;
    s.outcome[i] = s.covariates(i, 0) + 0.3 * s.treatment[i];
  }
  s.covariate_names = {"x1", "x2"};
  pop.covariate_names = {"x1", "x2"};
  pop.covariates.resize(4, 2);
  pop.covariates << 1, 1, 1, -1, 1, 1, 0, -1;  // mean x1 = 0.75, mean x2 = 0
}

}  // namespace

TEST_CASE("benchmark transform anchors") {
  bool clamped = false;
  auto [r2a, rhoa] = benchmark_transform(1.0, 0.0, 1.0, 1.0, &clamped);
  CHECK(r2a == doctest::Approx(0.5).epsilon(1e-13));
  auto [r2b, rhob] = benchmark_transform(0.1, 0.3, 1.0, 2.0, &clamped);
  CHECK(rhob == doctest::Approx(0.6).epsilon(1e-13));
  CHECK_FALSE(clamped);
  auto [r2c, rhoc] = benchmark_transform(0.25, 0.0, 2.0, 1.0, &clamped);
  CHECK(r2c == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  auto [r2d, rhod] = benchmark_transform(0.5, 0.8, 1.0, 2.0, &clamped);
  CHECK(rhod == 1.0);
  CHECK(clamped);
  auto [r2e, rhoe] = benchmark_transform(0.5, 0.8, 0.0, 1.0, &clamped);
  CHECK(r2e == 0.0);
  CHECK_THROWS_AS(benchmark_transform(0.5, 0.1, -1.0, 1.0), Error);
}

TEST_CASE("benchmark transform is monotone in k_sigma with range [0,1)") {
  double prev = -1.0;
  for (double k = 0.0; k < 40.0; k += 0.5) {
    auto [r2, rho] = benchmark_transform(0.3, 0.0, k, 1.0);
    CHECK(r2 > prev);
    CHECK(r2 >= 0.0);
    CHECK(r2 < 1.0);
    prev = r2;
  }
}

TEST_CASE("mrcs anchors") {
  CHECK(mrcs(1.36, 0.48) == doctest::Approx(2.83).epsilon(0.002));
  CHECK(mrcs(1.36, -0.63) == doctest::Approx(-2.16).epsilon(0.002));
  CHECK(mrcs(2.0, 2.0) == 1.0);
  bool unbounded = false;
  CHECK(std::isinf(mrcs(1.0, 0.0, &unbounded)));
  CHECK(unbounded);
}

TEST_CASE("k_min anchors") {
  KMin black = k_min(0.41, 0.20, -0.49);
  CHECK(black.k_sigma_min == doctest::Approx(2.05).epsilon(1e-12));
  CHECK(black.k_rho_min == doctest::Approx(-1.3066).epsilon(1e-3));
  KMin prev = k_min(0.41, 0.10, 0.59);
  CHECK(prev.k_rho_min == doctest::Approx(1.0853).epsilon(1e-3));
  CHECK_THROWS_AS(k_min(0.0, 0.1, 0.1), Error);
  CHECK_THROWS_AS(k_min(1.0, 0.1, 0.1), Error);

  KMin z = k_min(0.3, 0.0, 0.0);
  CHECK(z.unbounded_sigma);
  CHECK(z.unbounded_rho);
  CHECK(std::isinf(z.k_sigma_min));
}

TEST_CASE("exact inversion approaches the default scaled by 1/(1-rv)") {
  const double rv = 0.35;
  const double r2_loo = 1e-4;
  const double r2_bench = r2_loo / (1.0 + r2_loo);
  KMin dflt = k_min(rv, r2_bench, 0.5, false, r2_loo);
  KMin exact = k_min(rv, r2_bench, 0.5, true, r2_loo);
  const double ratio = exact.k_sigma_min / dflt.k_sigma_min;
  CHECK(ratio == doctest::Approx(1.0 / (1.0 - rv)).epsilon(0.01));
}

TEST_CASE("dropping an inactive covariate leaves the weights unchanged") {
  ExperimentalSample s;
  TargetPopulation pop;
  inactive_pair(s, pop);
  WeightSet w = entropy_balance(s.covariates, pop.covariates.colwise().mean());
  CHECK(stats::var(w.values) > 1e-4);  // x1 constraint is active
  LooError loo = loo_error(s, pop, w, {"x2"}, "x2", 1.0, WeightMethod::entropy);
  CHECK(loo.eps.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(loo.r2_loo < 1e-16);
}

TEST_CASE("loo statistics match a direct refit") {
  ExperimentalSample s = testutil::random_sample(150, 3, 71);
  TargetPopulation pop = testutil::random_population(400, 3, 72);
  WeightSet w = entropy_balance(s.covariates, pop.covariates.colwise().mean());
  LooError loo = loo_error(s, pop, w, {"x3"}, "x3", 2.0, WeightMethod::entropy);

  WeightSet direct =
      entropy_balance(s.covariates.leftCols(2), pop.covariates.leftCols(2).colwise().mean());
  Eigen::VectorXd eps = direct.values - w.values;
  CHECK((loo.eps - eps).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(loo.var_eps == doctest::Approx(stats::var(eps)).epsilon(1e-6));
  CHECK(loo.r2_loo ==
        doctest::Approx(stats::var(eps) / stats::var(w.values)).epsilon(1e-6));
  CHECK(loo.rho_loo >= -1.0);
  CHECK(loo.rho_loo <= 1.0);
}

TEST_CASE("grouped subsets drop jointly") {
  ExperimentalSample s = testutil::random_sample(150, 3, 73);
  TargetPopulation pop = testutil::random_population(400, 3, 74);
  WeightSet w = entropy_balance(s.covariates, pop.covariates.colwise().mean());
  LooError joint =
      loo_error(s, pop, w, {"x2", "x3"}, "pair", 2.0, WeightMethod::entropy);
  WeightSet direct =
      entropy_balance(s.covariates.leftCols(1), pop.covariates.leftCols(1).colwise().mean());
  CHECK((joint.eps - (direct.values - w.values)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("loo input guards") {
  ExperimentalSample s = testutil::random_sample(80, 2, 75);
  TargetPopulation pop = testutil::random_population(120, 2, 76);
  WeightSet w = entropy_balance(s.covariates, pop.covariates.colwise().mean());
  CHECK_THROWS_AS(loo_error(s, pop, w, {}, "none", 1.0, WeightMethod::entropy), Error);
  CHECK_THROWS_AS(loo_error(s, pop, w, {"age"}, "age", 1.0, WeightMethod::entropy),
                  Error);
  CHECK_THROWS_AS(
      loo_error(s, pop, w, {"x1", "x2"}, "all", 1.0, WeightMethod::entropy), Error);
  CHECK_THROWS_AS(loo_error(s, pop, w, {"x1"}, "x1", 1.0, WeightMethod::uniform),
                  Error);
}

TEST_CASE("loo works for ipw refits") {
  ExperimentalSample s = testutil::random_sample(150, 2, 77);
  TargetPopulation pop = testutil::random_population(300, 2, 78);
  WeightSet w = ipw_logistic(s.covariates, pop.covariates);
  LooError loo = loo_error(s, pop, w, {"x2"}, "x2", 1.5, WeightMethod::ipw_logistic);
  CHECK(loo.r2_loo > 0.0);
  CHECK(loo.refit_converged);
}

TEST_CASE("benchmark table row order and failure reporting") {
  ExperimentalSample s = testutil::random_sample(150, 3, 79);
  TargetPopulation pop = testutil::random_population(400, 3, 80);
  WeightSet w = entropy_balance(s.covariates, pop.covariates.colwise().mean());
  const double est = 0.8, q = 1.0, sigma2 = 3.0;
  const double var_w = stats::var(w.values);
  const double rv = robustness_value(est, q, sigma2, var_w);
  BenchmarkOptions opts;
  opts.subsets = {{"x1+x2", {"x1", "x2"}}, {"all", {"x1", "x2", "x3"}}};
  auto rows = benchmark_table(s, pop, w, est, q, sigma2, rv, opts);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].label == "x1");
  CHECK(rows[1].label == "x2");
  CHECK(rows[2].label == "x3");
  CHECK(rows[3].label == "x1+x2");
  CHECK(rows[4].label == "all");
  CHECK_FALSE(rows[4].refit_converged);  // dropping everything cannot refit
  for (int i = 0; i < 4; ++i) {
    CHECK(rows[i].refit_converged);
    CHECK(rows[i].r2_bench ==
          doctest::Approx(rows[i].r2_loo / (1.0 + rows[i].r2_loo)).epsilon(1e-12));
    CHECK(std::isfinite(rows[i].bias));
    if (rows[i].bias != 0.0)
      CHECK(rows[i].mrcs == doctest::Approx(est / rows[i].bias).epsilon(1e-12));
  }
}

TEST_CASE("calibrate wires bias, mrcs and k_min together") {
  LooError loo;
  loo.label = "x";
  loo.r2_loo = 0.25;
  loo.rho_loo = 0.4;
  const double est = 1.0, q = 1.0, sigma2 = 2.0, var_w = 1.0;
  const double rv = robustness_value(est, q, sigma2, var_w);
  BenchmarkOptions opts;
  opts.k_sigma = 2.0;
  opts.k_rho = 1.5;
  BenchmarkResult r = calibrate(loo, est, q, sigma2, var_w, rv, opts);
  CHECK(r.r2_bench == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(r.rho_bench == doctest::Approx(0.6).epsilon(1e-12));
  SensitivityParams p;
  p.r2_eps = r.r2_bench;
  p.rho = r.rho_bench;
  p.sigma2 = sigma2;
  p.var_w = var_w;
  CHECK(r.bias == doctest::Approx(bias_weighted(p)).epsilon(1e-12));
  // mrcs always refers to the k = 1 point
  p.r2_eps = 0.2;
  p.rho = 0.4;
  CHECK(r.mrcs == doctest::Approx(est / bias_weighted(p)).epsilon(1e-12));
  CHECK(r.k_sigma_min == doctest::Approx(rv / 0.2).epsilon(1e-12));
  CHECK(r.k_rho_min == doctest::Approx(std::sqrt(rv) / 0.4).epsilon(1e-12));
}

TEST_CASE("augmented-mode loo correlates against the model shift") {
  ExperimentalSample s = testutil::random_sample(150, 3, 81);
  TargetPopulation pop = testutil::random_population(400, 3, 82);
  WeightSet w = entropy_balance(s.covariates, pop.covariates.colwise().mean());
  LinearTauModel m = fit_linear_tau_model(s);
  LooError loo = loo_error(s, pop, w, {"x2"}, "x2", 2.0, WeightMethod::entropy,
                           AnalysisMode::augmented, &m);
  CHECK(loo.rho_loo >= -1.0);
  CHECK(loo.rho_loo <= 1.0);
  CHECK_THROWS_AS(loo_error(s, pop, w, {"x2"}, "x2", 2.0, WeightMethod::entropy,
                            AnalysisMode::augmented, nullptr),
                  Error);
}
