// Acceptance gate: one pass/fail line per criterion, exit code = failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gsens/benchmark.hpp"
#include "gsens/report.hpp"
#include "gsens/rng.hpp"
#include "gsens/sensitivity.hpp"
#include "gsens/sim.hpp"
#include "gsens/stats.hpp"
#include "gsens/weights.hpp"

using namespace gsens;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass,
            const std::string& detail) {
  std::printf("%s criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", number,
              name.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
  if (!pass) ++g_failures;
}

struct Row {
  const char* label;
  double r2, rho, bias, mrcs;
};

SensitivityParams params(double r2, double rho, double sigma2, double var_w) {
  SensitivityParams p;
  p.r2_eps = r2;
  p.rho = rho;
  p.sigma2 = sigma2;
  p.var_w = var_w;
  return p;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. published-table arithmetic replay, site one
void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const double est = 1.36, sigma2 = 8.4, var_w = 0.773;
  const double rv = robustness_value(est, 1.0, sigma2, var_w);
  // printed rows: r2, rho, bias, mrcs (bias/mrcs replayed where r2 >= 0.04)
  const std::vector<Row> rows = {
      {"prev_earnings", 0.04, 0.59, 0.31, 4.4}, {"age", 0.06, 0.75, 0.48, 2.83},
      {"married", 0.11, 0.19, 0.17, 7.9},       {"hourly_wage", 0.05, -0.42, -0.25, -5.5},
      {"black", 0.20, -0.49, -0.63, -2.2},      {"hispanic", 0.14, -0.10, -0.10, -14.0},
      {"hs_ged", 0.12, 0.08, 0.07, 18.2},       {"years_educ", 0.00, 0.28, 0.02, 59.7}};
  std::ostringstream bad;
  for (const auto& r : rows) {
    if (r.r2 < 0.04) continue;
    const double bias = bias_weighted(params(r.r2, r.rho, sigma2, var_w));
    if (std::abs(bias - r.bias) > 0.03)
      bad << r.label << " bias " << bias << " vs " << r.bias << "; ";
    const double m = mrcs(est, bias);
    if (std::abs(m - r.mrcs) > 0.15)
      bad << r.label << " mrcs " << m << " vs " << r.mrcs << "; ";
  }
  // k_sigma_min = rv / r2 and k_rho_min = sqrt(rv) / rho for the listed rows
  const std::vector<std::pair<double, double>> ksig = {
      {0.20, 2.0}, {0.06, 7.0}, {0.11, 3.8}};
  for (const auto& [r2, printed] : ksig) {
    const double k = rv / r2;
    if (std::abs(k - printed) > 0.1)
      bad << "k_sigma_min " << k << " vs " << printed << "; ";
  }
  const std::vector<std::pair<double, double>> krho = {
      {0.59, 1.1}, {0.75, 0.9}, {-0.49, -1.3}};
  for (const auto& [rho, printed] : krho) {
    const double k = std::sqrt(rv) / rho;
    if (std::abs(k - printed) > 0.1)
      bad << "k_rho_min " << k << " vs " << printed << "; ";
  }
  if (std::abs(rv - 0.41) > 0.005) bad << "rv " << rv << " vs 0.41; ";
  if (elapsed_s(t0) >= 1.0) bad << "runtime " << elapsed_s(t0) << "s; ";
  report(1, "benchmark-table arithmetic replay, site one", bad.str().empty(),
         bad.str());
}

// 2. published-table arithmetic replay, site two
void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  const double est = 0.73, sigma2 = 10.04, rv_printed = 0.14;
  const double a = rv_printed * rv_printed / (1.0 - rv_printed);
  const double var_w = est * est / (sigma2 * a);  // inverted from the printed rv
  std::ostringstream bad;
  if (std::abs(var_w - 2.33) > 0.01) bad << "var_w " << var_w << " vs 2.33; ";
  const double bias = bias_weighted(params(0.01, 0.94, sigma2, var_w));
  if (std::abs(bias - 0.48) > 0.05) bad << "bias " << bias << " vs 0.48; ";
  const double m = mrcs(est, bias);
  if (std::abs(m - 1.52) > 0.2) bad << "mrcs " << m << " vs 1.52; ";
  if (elapsed_s(t0) >= 1.0) bad << "runtime " << elapsed_s(t0) << "s; ";
  report(2, "benchmark-table arithmetic replay, site two", bad.str().empty(),
         bad.str());
}

// 3. robustness value fixed point
void criterion3() {
  std::ostringstream bad;
  const double half = robustness_value(1.0, 1.0, 2.0, 1.0);  // a = 0.5
  if (std::abs(half - 0.5) > 1e-12) bad << "rv(a=0.5) " << half << "; ";
  auto rng = make_stream(303, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int off = 0;
  for (int k = 0; k < 1000; ++k) {
    const double est = 0.1 + 2.0 * unif(rng);
    const double q = 0.1 + 0.9 * unif(rng);
    const double s2 = 0.5 + 9.5 * unif(rng);
    const double vw = 0.2 + 4.8 * unif(rng);
    const double aq = q * q * est * est / (s2 * vw);
    const double rv = robustness_value(est, q, s2, vw);
    if (std::abs(rv * rv / (1.0 - rv) - aq) > 1e-10) ++off;
  }
  if (off) bad << off << " of 1000 fixed-point residuals above 1e-10; ";
  report(3, "robustness value fixed-point property", bad.str().empty(), bad.str());
}

// 4. extreme-scenario identities
void criterion4() {
  std::ostringstream bad;
  int off = 0;
  for (double cor = -1.0; cor <= 1.0 + 1e-12; cor += 0.01) {
    const double c = std::clamp(cor, -1.0, 1.0);
    ExtremeScenario e = extreme_scenario(c, std::nullopt, 4.0, 1.0);
    if (std::abs(e.r2_max - (1.0 - c * c)) > 1e-12) ++off;
  }
  if (off) bad << off << " grid points break r2_max = 1 - cor^2; ";
  ExtremeScenario e = extreme_scenario(0.07, std::nullopt, 8.4, 0.773);
  if (std::abs(e.rho_max - 0.997) > 0.002) bad << "rho_max " << e.rho_max << "; ";
  if (std::abs(e.r2_max - 0.994) > 0.002) bad << "r2_max " << e.r2_max << "; ";
  report(4, "extreme-scenario identities", bad.str().empty(), bad.str());
}

// 5. killer-boundary anchors and rv geometry
void criterion5() {
  std::ostringstream bad;
  const double est = 1.36, sigma2 = 8.4, var_w = 0.773;
  const double b1 = bias_weighted(params(0.25, 0.93, sigma2, var_w));
  const double b2 = bias_weighted(params(0.75, 0.31, sigma2, var_w));
  if (std::abs(b1 - est) > 0.02) bad << "bias(0.25,0.93) " << b1 << "; ";
  if (std::abs(b2 - est) > 0.02) bad << "bias(0.75,0.31) " << b2 << "; ";

  const double rv = robustness_value(est, 1.0, sigma2, var_w);
  GridConfig grid;  // default 400 x 400 over [0, 0.99] x [-1, 1]
  ContourGrid g = killer_region(est, 1.0, sigma2, var_w, 1.0, grid, {},
                                KillerCriterion::reduce);
  const int nr = static_cast<int>(g.rho_axis.size());
  const int nc = static_cast<int>(g.r2_axis.size());
  auto masked = [&](int i, int j) { return g.killer_mask(i, j); };
  double best = 1e9, best_r2 = 0, best_rho = 0;
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nc; ++j) {
      if (!masked(i, j)) continue;
      const bool boundary = (i > 0 && !masked(i - 1, j)) ||
                            (i + 1 < nr && !masked(i + 1, j)) ||
                            (j > 0 && !masked(i, j - 1)) ||
                            (j + 1 < nc && !masked(i, j + 1));
      if (!boundary) continue;
      const double rho = g.rho_axis[i];
      if (rho <= 0.0) continue;  // the rho^2 = r2 crossing is in the upper half
      const double d = std::abs(rho * rho - g.r2_axis[j]);
      if (d < best) {
        best = d;
        best_r2 = g.r2_axis[j];
        best_rho = rho;
      }
    }
  const double dr2 = g.r2_axis[1] - g.r2_axis[0];
  const double drho = g.rho_axis[1] - g.rho_axis[0];
  if (std::abs(best_r2 - rv) > 1.5 * dr2)
    bad << "boundary r2 " << best_r2 << " vs rv " << rv << "; ";
  if (std::abs(best_rho - std::sqrt(rv)) > 1.5 * drho)
    bad << "boundary rho " << best_rho << " vs sqrt(rv) " << std::sqrt(rv) << "; ";
  report(5, "killer-boundary anchors and rv geometry", bad.str().empty(), bad.str());
}

// 6. monte carlo oracle suite
void criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  DgpConfig c;
  c.n = 2000;
  c.N = 10000;
  c.p = 2;
  c.sel_intercept = -1.2;
  c.sel_x = (Eigen::VectorXd(2) << 0.5, -0.4).finished();
  c.u_kind = ConfounderKind::gaussian;
  c.u_intercept = 0.3;
  c.u_x = Eigen::VectorXd::Zero(2);  // linear omitted-variable case applies
  c.u_s = 0.6;
  c.out_intercept1 = 1.0;
  c.out_intercept0 = 0.2;
  c.out_x1 = (Eigen::VectorXd(2) << 1.0, 0.5).finished();
  c.out_x0 = (Eigen::VectorXd(2) << 0.6, 0.3).finished();
  c.out_u1 = 1.2;
  c.out_u0 = 0.4;
  c.noise_sd = 1.0;
  c.seed = 42;
  std::ostringstream bad;
  try {
    OracleReport rep = oracle_verify(c, 500);
    for (const auto& chk : rep.checks)
      if (!chk.pass)
        bad << chk.name << " (" << chk.empirical << " vs " << chk.analytic
            << " tol " << chk.tolerance << "); ";
    if (rep.failed_replications > 0)
      bad << rep.failed_replications << " failed fits; ";
  } catch (const std::exception& e) {
    bad << e.what() << "; ";
  }
  const double dt = elapsed_s(t0);
  if (dt >= 120.0) bad << "runtime " << dt << "s; ";
  report(6, "monte carlo oracle suite (500 replications)", bad.str().empty(),
         bad.str());
}

// 7. variance bounds from extremal couplings
void criterion7() {
  std::ostringstream bad;
  Eigen::VectorXd two1(2), two0(2);
  two1 << 0, 1;
  two0 << 0, 1;
  VarianceBounds tp = sigma_tau_bounds(two1, two0, Sigma2Assumption::none);
  if (tp.lower != 0.0 || tp.upper != 1.0)
    bad << "two-point bounds (" << tp.lower << ", " << tp.upper << "); ";

  auto rng = make_stream(707, 0);
  std::normal_distribution<double> gauss(0.0, 1.5);
  Eigen::VectorXd y1(12);
  for (int i = 0; i < 12; ++i) y1[i] = gauss(rng);
  Eigen::VectorXd y0c = Eigen::VectorXd::Constant(5, 2.0);
  VarianceBounds cc = sigma_tau_bounds(y1, y0c, Sigma2Assumption::none);
  if (std::abs(cc.lower - stats::var(y1)) > 1e-12 ||
      std::abs(cc.upper - stats::var(y1)) > 1e-12)
    bad << "constant-control bounds not var(y1); ";

  const int m = 6;
  Eigen::VectorXd a1(m), a0(m);
  for (int i = 0; i < m; ++i) {
    a1[i] = 2.0 * gauss(rng) + 1.0;
    a0[i] = gauss(rng);
  }
  VarianceBounds rb = sigma_tau_bounds(a1, a0, Sigma2Assumption::none);
  std::vector<Eigen::Index> pairing(m);
  std::iota(pairing.begin(), pairing.end(), 0);
  int escapes = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::shuffle(pairing.begin(), pairing.end(), rng);
    const double v = coupling_variance(a1, a0, pairing);
    if (v < rb.lower - 1e-9 || v > rb.upper + 1e-9) ++escapes;
  }
  if (escapes) bad << escapes << " couplings escaped the bounds; ";
  report(7, "frechet-hoeffding variance bounds", bad.str().empty(), bad.str());
}

// 8. entropy balancing precision
void criterion8() {
  std::ostringstream bad;
  auto rng = make_stream(808, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd x(300, 4);
  for (int i = 0; i < 300; ++i)
    for (int j = 0; j < 4; ++j) x(i, j) = gauss(rng);
  Eigen::VectorXd target = x.colwise().mean();
  target.array() += 0.25;
  WeightSet w = entropy_balance(x, target);
  for (int j = 0; j < 4; ++j) {
    const double wm = (w.values.array() * x.col(j).array()).mean();
    const double sdiff = (wm - target[j]) / stats::sd(x.col(j));
    if (std::abs(sdiff) > 1e-8)
      bad << "standardized imbalance " << sdiff << " on column " << j << "; ";
  }

  Eigen::MatrixXd xb(8, 1);
  xb << 1, 1, 1, 1, 0, 0, 0, 0;
  Eigen::VectorXd tb(1);
  tb << 0.75;
  WeightSet wb = entropy_balance(xb, tb);
  for (int i = 0; i < 8; ++i) {
    const double expect = xb(i, 0) == 1.0 ? 1.5 : 0.5;
    if (std::abs(wb.values[i] - expect) > 1e-10) {
      bad << "closed-form weight " << wb.values[i] << " vs " << expect << "; ";
      break;
    }
  }
  report(8, "entropy balancing precision", bad.str().empty(), bad.str());
}

// 9. byte-identical outputs across two full runs
void criterion9() {
  auto run = [] {
    DgpConfig c;
    c.n = 300;
    c.N = 1200;
    c.p = 2;
    c.sel_intercept = -1.0;
    c.sel_x = (Eigen::VectorXd(2) << 0.5, -0.3).finished();
    c.u_kind = ConfounderKind::gaussian;
    c.u_x = Eigen::VectorXd::Zero(2);
    c.u_s = 0.5;
    c.out_x1 = (Eigen::VectorXd(2) << 1.0, 0.4).finished();
    c.out_x0 = (Eigen::VectorXd(2) << 0.6, 0.2).finished();
    c.out_u1 = 1.0;
    c.out_u0 = 0.3;
    c.seed = 99;
    SimData d = generate(c, 0);

    ReportBundle b;
    WeightSet w = entropy_balance(d.sample.covariates,
                                  d.population.covariates.colwise().mean());
    PateEstimate ht = weighted_pate(d.sample, w, EstimatorStyle::ht);
    b.estimates = {sate_dim(d.sample), ht};
    VarianceBounds vb = sigma_tau_bounds(d.sample.treated_outcomes(),
                                         d.sample.control_outcomes(),
                                         Sigma2Assumption::none);
    b.variance_bounds = vb;
    b.sensitivity = summarize_sensitivity(d.sample, w, ht.value, 1.0, vb.upper,
                                          AnalysisMode::weighted);
    BenchmarkOptions opts;
    b.benchmark = benchmark_table(d.sample, d.population, w, ht.value, 1.0,
                                  vb.upper, b.sensitivity.rv, opts);
    b.balance = balance_table(d.sample, d.population, w);
    b.extreme = extreme_scenario(b.sensitivity.cor_w_tau_hat, std::nullopt,
                                 vb.upper, b.sensitivity.var_w);
    GridConfig gc;
    gc.n_r2 = 80;
    gc.n_rho = 80;
    std::vector<BenchmarkPoint> pts;
    for (const auto& r : b.benchmark)
      pts.push_back({r.r2_bench, r.rho_bench, r.label});
    ContourGrid grid = killer_region(ht.value, 1.0, vb.upper,
                                     b.sensitivity.var_w, b.sensitivity.rho_bound,
                                     gc, pts, KillerCriterion::reduce);
    std::ostringstream all;
    all << emit_report(b, ReportFormat::json);
    all << emit_report(b, ReportFormat::text);
    all << render_contour(grid);
    all << render_extreme_plot(ht.value, vb.upper, b.sensitivity.var_w,
                               b.sensitivity.cor_w_tau_hat, kDefaultCStar);
    return all.str();
  };
  const std::string first = run();
  const std::string second = run();
  report(9, "byte-identical reports and plots across two runs", first == second,
         first == second ? "" : "outputs differ");
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  if (g_failures)
    std::printf("%d criterion(s) failed\n", g_failures);
  else
    std::printf("all criteria passed\n");
  return g_failures;
}
