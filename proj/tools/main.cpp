#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gsens/benchmark.hpp"
#include "gsens/dataset.hpp"
#include "gsens/error.hpp"
#include "gsens/estimators.hpp"
#include "gsens/report.hpp"
#include "gsens/sensitivity.hpp"
#include "gsens/sim.hpp"
#include "gsens/stats.hpp"
#include "gsens/weights.hpp"

namespace fs = std::filesystem;
using namespace gsens;

namespace {

struct CommonArgs {
  std::string sample_path;
  std::string population_path;
  std::string treatment_col = "treatment";
  std::string outcome_col = "outcome";
  std::string weights_col;
  std::string config_path;
  std::string out_dir = ".";
  std::string weight_method;
  std::string estimator;
  std::string mode;
  std::string sigma2_assumption;
  double q = -1;
  double sigma2_override = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool need_data) {
  auto* s = cmd->add_option("--sample", a.sample_path, "experimental sample CSV");
  auto* p = cmd->add_option("--population", a.population_path, "target population CSV");
  if (need_data) {
    s->required();
    p->required();
  }
  cmd->add_option("--treatment-col", a.treatment_col, "treatment column name");
  cmd->add_option("--outcome-col", a.outcome_col, "outcome column name");
  cmd->add_option("--weights-col", a.weights_col, "external weights column name");
  cmd->add_option("--config", a.config_path, "key=value configuration file");
  cmd->add_option("--out-dir", a.out_dir, "output directory for artifacts");
  cmd->add_option("--weight-method", a.weight_method,
                  "entropy | ipw_logistic | uniform | external");
  cmd->add_option("--estimator", a.estimator, "dim | ht | hajek | augmented");
  cmd->add_option("--mode", a.mode, "weighted | augmented");
  cmd->add_option("--q", a.q, "bias fraction of the estimate, in (0,1]");
  cmd->add_option("--sigma2-assumption", a.sigma2_assumption,
                  "none | cov-y0-tau-nonneg | po-corr-nonneg | po-corr-negative");
  cmd->add_option("--sigma2-override", a.sigma2_override,
                  "use this effect variance instead of the estimated upper bound");
  cmd->add_option("--seed", a.seed, "random seed")->each([&](const std::string&) {
    a.seed_set = true;
  });
}

AnalysisConfig build_config(const CommonArgs& a) {
  AnalysisConfig cfg;
  if (!a.config_path.empty()) cfg = parse_config_file(a.config_path);
  if (!a.weight_method.empty())
    cfg.weight_method = weight_method_from_string(a.weight_method);
  if (!a.estimator.empty()) cfg.estimator = estimator_style_from_string(a.estimator);
  if (!a.mode.empty()) cfg.mode = analysis_mode_from_string(a.mode);
  if (a.q > 0) cfg.q = a.q;
  if (!a.sigma2_assumption.empty())
    cfg.sigma2_assumption = sigma2_assumption_from_string(a.sigma2_assumption);
  if (a.sigma2_override > 0) cfg.sigma2_override = a.sigma2_override;
  if (a.seed_set) cfg.seed = a.seed;
  cfg.validate();
  return cfg;
}

AnalysisInput load_input(const CommonArgs& a) {
  ColumnSchema schema;
  schema.treatment_col = a.treatment_col;
  schema.outcome_col = a.outcome_col;
  schema.weights_col = a.weights_col;
  const ExperimentalSample sample = load_sample(a.sample_path, schema);
  const TargetPopulation population = load_population(a.population_path);
  return align(sample, population, build_config(a));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
}

double resolve_sigma2(const AnalysisInput& input, const VarianceBounds& bounds) {
  if (input.config.sigma2_override) return *input.config.sigma2_override;
  return bounds.upper;
}

std::vector<std::pair<std::string, std::vector<std::string>>> parse_subsets(
    const std::string& spec) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  std::istringstream groups(spec);
  std::string group;
  while (std::getline(groups, group, ';')) {
    if (group.empty()) continue;
    std::vector<std::string> cols;
    std::istringstream cs(group);
    std::string col;
    while (std::getline(cs, col, ',')) {
      if (!col.empty()) cols.push_back(col);
    }
    if (cols.size() > 1) out.push_back({group, cols});
  }
  return out;
}

struct AnalysisArtifacts {
  WeightSet weights;
  PateEstimate estimate;
  VarianceBounds bounds;
  double sigma2 = 0;
  std::optional<XiStats> xi;
  std::optional<LinearTauModel> model;
  SensitivitySummary summary;
};

AnalysisArtifacts run_analysis(const AnalysisInput& input) {
  AnalysisArtifacts art;
  art.weights = fit_weights(input);
  art.bounds = sigma_tau_bounds(input.sample.treated_outcomes(),
                                input.sample.control_outcomes(),
                                input.config.sigma2_assumption);
  const double sigma2_tau = resolve_sigma2(input, art.bounds);
  const TauModel* model_ptr = nullptr;
  if (input.config.mode == AnalysisMode::augmented ||
      input.config.estimator == EstimatorStyle::augmented) {
    art.model = fit_linear_tau_model(input.sample);
    model_ptr = &*art.model;
  }
  switch (input.config.estimator) {
    case EstimatorStyle::dim:
      art.estimate = sate_dim(input.sample);
      break;
    case EstimatorStyle::augmented:
      art.estimate =
          augmented_pate(input.sample, input.population, art.weights, *model_ptr);
      break;
    default:
      art.estimate = weighted_pate(input.sample, art.weights, input.config.estimator);
  }
  art.sigma2 = sigma2_tau;
  if (input.config.mode == AnalysisMode::augmented) {
    art.xi = sigma_xi_bound(sigma2_tau, *art.model, input.sample);
    art.sigma2 = input.config.sigma2_override ? sigma2_tau : art.xi->sigma2_xi_max;
  }
  art.summary =
      summarize_sensitivity(input.sample, art.weights, art.estimate.value,
                            input.config.q, art.sigma2, input.config.mode, model_ptr);
  if (art.xi) art.summary.sigma2_clamped = art.xi->clamped;
  return art;
}

std::string balance_csv(const std::vector<BalanceRow>& rows) {
  std::ostringstream os;
  os << "covariate,sample_mean,weighted_mean,population_mean,std_diff,"
        "weighted_std_diff,zero_variance\n";
  os.precision(17);
  for (const auto& r : rows)
    os << r.covariate << "," << r.sample_mean << "," << r.weighted_mean << ","
       << r.population_mean << "," << r.std_diff << "," << r.weighted_std_diff << ","
       << (r.zero_variance ? 1 : 0) << "\n";
  return os.str();
}

std::string benchmark_csv(const std::vector<BenchmarkResult>& rows) {
  std::ostringstream os;
  os << "label,r2_loo,rho_loo,r2_bench,rho_bench,bias,mrcs,k_sigma_min,k_rho_min,"
        "refit_converged\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << r.label << "," << r.r2_loo << "," << r.rho_loo << "," << r.r2_bench << ","
       << r.rho_bench << "," << r.bias << ",";
    if (r.mrcs_unbounded)
      os << "unbounded";
    else
      os << r.mrcs;
    os << "," << r.k_sigma_min << "," << r.k_rho_min << ","
       << (r.refit_converged ? 1 : 0) << "\n";
  }
  return os.str();
}

ContourGrid build_grid(const AnalysisInput& input, const AnalysisArtifacts& art,
                       const std::vector<BenchmarkPoint>& points) {
  GridConfig gc;
  gc.n_r2 = input.config.grid_r2;
  gc.n_rho = input.config.grid_rho;
  return killer_region(art.estimate.value, input.config.q, art.sigma2,
                       art.summary.var_w, art.summary.rho_bound, gc, points);
}

int run(int argc, char** argv) {
  CLI::App app{"population effect generalization with omitted-confounder "
               "sensitivity analysis"};
  app.require_subcommand(1);

  CommonArgs a;

  auto* c_weights = app.add_subcommand("weights", "fit weights and report balance");
  add_common(c_weights, a, true);

  auto* c_estimate = app.add_subcommand("estimate", "point estimate of the PATE");
  add_common(c_estimate, a, true);
  int bootstrap_reps = 0;
  c_estimate->add_option("--bootstrap", bootstrap_reps,
                         "percentile bootstrap replicates (>= 100)");

  auto* c_analyze =
      app.add_subcommand("analyze", "full sensitivity analysis with reports");
  add_common(c_analyze, a, true);
  bool with_benchmark = false;
  c_analyze->add_flag("--with-benchmark", with_benchmark,
                      "include the leave-one-out benchmark table");

  auto* c_benchmark = app.add_subcommand("benchmark", "formal benchmarking table");
  add_common(c_benchmark, a, true);
  double k_sigma = 1, k_rho = 1;
  std::string subsets_spec;
  bool exact_inversion = false;
  c_benchmark->add_option("--k-sigma", k_sigma, "relative imbalance strength");
  c_benchmark->add_option("--k-rho", k_rho, "relative correlation strength");
  c_benchmark->add_option("--subsets", subsets_spec,
                          "joint subsets: comma lists, semicolon separated");
  c_benchmark->add_flag("--exact-inversion", exact_inversion,
                        "invert the calibration map exactly for k_sigma_min");

  auto* c_contour = app.add_subcommand("contour", "bias contour plot (SVG)");
  add_common(c_contour, a, true);

  auto* c_extreme = app.add_subcommand("extreme", "extreme scenario plot (SVG)");
  add_common(c_extreme, a, true);

  auto* c_simulate = app.add_subcommand("simulate", "synthetic DGP and oracle checks");
  std::string dgp_path;
  int replications = 0;
  std::string sim_out = ".";
  c_simulate->add_option("--dgp-config", dgp_path, "key=value DGP configuration")
      ->required();
  c_simulate->add_option("--replications", replications,
                         "run the oracle over this many replications (>= 100)");
  c_simulate->add_option("--out-dir", sim_out, "output directory for artifacts");

  auto* c_report = app.add_subcommand("report", "render a JSON report as text");
  std::string report_path;
  c_report->add_option("--input", report_path, "report JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  if (c_report->parsed()) {
    const ReportBundle bundle = parse_report_json(slurp(report_path));
    std::cout << emit_report(bundle, ReportFormat::text);
    return 0;
  }

  if (c_simulate->parsed()) {
    const DgpConfig cfg = parse_dgp_config_file(dgp_path);
    fs::create_directories(sim_out);
    const SimData d = generate(cfg);
    write_sample_csv((fs::path(sim_out) / "sim_sample.csv").string(), d.sample);
    write_population_csv((fs::path(sim_out) / "sim_population.csv").string(),
                         d.population);
    std::cout << "wrote sim_sample.csv and sim_population.csv (n=" << d.sample.n()
              << ", N=" << d.population.n() << ", PATE=" << d.pate << ")\n";
    if (replications > 0) {
      const OracleReport rep = oracle_verify(cfg, replications);
      const std::string text = format_oracle_report(rep);
      std::cout << text;
      write_file(fs::path(sim_out) / "oracle_report.txt", text);
      std::ostringstream js;
      js << "{\n  \"replications\": " << rep.replications
         << ",\n  \"failed_replications\": " << rep.failed_replications
         << ",\n  \"checks\": [\n";
      js.precision(17);
      for (std::size_t i = 0; i < rep.checks.size(); ++i) {
        const auto& c = rep.checks[i];
        js << "    {\"name\": \"" << c.name << "\", \"analytic\": " << c.analytic
           << ", \"empirical\": " << c.empirical << ", \"tolerance\": " << c.tolerance
           << ", \"pass\": " << (c.pass ? "true" : "false") << "}"
           << (i + 1 < rep.checks.size() ? "," : "") << "\n";
      }
      js << "  ]\n}\n";
      write_file(fs::path(sim_out) / "oracle_report.json", js.str());
      return rep.all_pass() ? 0 : 1;
    }
    return 0;
  }

  const AnalysisInput input = load_input(a);
  fs::create_directories(a.out_dir);

  if (c_weights->parsed()) {
    const WeightSet w = fit_weights(input);
    std::ostringstream ws;
    ws.precision(17);
    ws << "weight\n";
    for (Eigen::Index i = 0; i < w.values.size(); ++i) ws << w.values[i] << "\n";
    write_file(fs::path(a.out_dir) / "weights.csv", ws.str());
    const auto rows = balance_table(input.sample, input.population, w);
    write_file(fs::path(a.out_dir) / "balance.csv", balance_csv(rows));
    std::cout << "method " << to_string(w.method) << ", converged "
              << (w.converged ? "yes" : "no") << ", iterations " << w.iterations
              << "\n";
    for (const auto& r : rows)
      std::cout << "  " << r.covariate << ": std diff " << r.std_diff
                << " -> weighted " << r.weighted_std_diff << "\n";
    return 0;
  }

  if (c_estimate->parsed()) {
    const AnalysisArtifacts art = run_analysis(input);
    std::cout << "estimate (" << to_string(art.estimate.style)
              << "): " << art.estimate.value << " (n1=" << art.estimate.n1
              << ", n0=" << art.estimate.n0 << ")\n";
    if (bootstrap_reps > 0) {
      const BootstrapResult bs = bootstrap_interval(input, input.config.estimator,
                                                    bootstrap_reps, input.config.seed);
      std::cout << "95% percentile interval: [" << bs.lower << ", " << bs.upper
                << "] (" << bs.replicates << " replicates, " << bs.failed
                << " failed, seed " << bs.seed << ")\n";
    }
    return 0;
  }

  AnalysisArtifacts art = run_analysis(input);

  if (c_benchmark->parsed()) {
    BenchmarkOptions opts;
    opts.k_sigma = k_sigma;
    opts.k_rho = k_rho;
    opts.exact_inversion = exact_inversion;
    opts.mode = input.config.mode;
    opts.subsets = parse_subsets(subsets_spec);
    const TauModel* model_ptr = art.model ? &*art.model : nullptr;
    const auto rows = benchmark_table(input.sample, input.population, art.weights,
                                      art.estimate.value, input.config.q, art.sigma2,
                                      art.summary.rv, opts, model_ptr);
    write_file(fs::path(a.out_dir) / "benchmark.csv", benchmark_csv(rows));
    std::cout << benchmark_csv(rows);
    return 0;
  }

  if (c_contour->parsed() || c_extreme->parsed() || c_analyze->parsed()) {
    const ExtremeScenario extreme = extreme_scenario(
        art.summary.cor_w_tau_hat, std::nullopt, art.sigma2, art.summary.var_w);

    if (c_extreme->parsed()) {
      const std::string svg =
          render_extreme_plot(art.estimate.value, art.sigma2, art.summary.var_w,
                              art.summary.cor_w_tau_hat, kDefaultCStar);
      write_file(fs::path(a.out_dir) / "extreme.svg", svg);
      std::cout << "rho_max " << extreme.rho_max << ", R2_max " << extreme.r2_max
                << ", bias_max " << extreme.bias_max << "\n";
      return 0;
    }

    std::vector<BenchmarkResult> bench_rows;
    if (c_analyze->parsed() && with_benchmark) {
      BenchmarkOptions opts;
      opts.mode = input.config.mode;
      const TauModel* model_ptr = art.model ? &*art.model : nullptr;
      bench_rows = benchmark_table(input.sample, input.population, art.weights,
                                   art.estimate.value, input.config.q, art.sigma2,
                                   art.summary.rv, opts, model_ptr);
      write_file(fs::path(a.out_dir) / "benchmark.csv", benchmark_csv(bench_rows));
    }
    std::vector<BenchmarkPoint> points;
    for (const auto& r : bench_rows) {
      if (!r.refit_converged) continue;
      points.push_back({r.r2_bench, r.rho_bench, r.label});
    }
    const ContourGrid grid = build_grid(input, art, points);
    const std::string svg = render_contour(grid);
    write_file(fs::path(a.out_dir) / "contour.svg", svg);
    if (c_contour->parsed()) {
      std::cout << "wrote contour.svg (" << grid.r2_axis.size() << "x"
                << grid.rho_axis.size() << " grid)\n";
      return 0;
    }

    ReportBundle bundle;
    bundle.estimates.push_back(sate_dim(input.sample));
    if (input.config.estimator != EstimatorStyle::dim)
      bundle.estimates.push_back(art.estimate);
    bundle.sensitivity = art.summary;
    bundle.variance_bounds = art.bounds;
    bundle.xi_stats = art.xi;
    bundle.balance = balance_table(input.sample, input.population, art.weights);
    bundle.extreme = extreme;
    bundle.contour_path = "contour.svg";
    bundle.sample_digest = content_digest(slurp(a.sample_path));
    bundle.population_digest = content_digest(slurp(a.population_path));
    bundle.config = input.config;
    bundle.benchmark = bench_rows;
    write_file(fs::path(a.out_dir) / "report.json",
               emit_report(bundle, ReportFormat::json));
    write_file(fs::path(a.out_dir) / "report.txt",
               emit_report(bundle, ReportFormat::text));
    std::cout << emit_report(bundle, ReportFormat::text);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 3;
  }
}
