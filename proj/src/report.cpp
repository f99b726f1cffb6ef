#include "gsens/report.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "gsens/error.hpp"

namespace gsens {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string fmt(double v, const char* f = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// 4 significant digits for the human-readable tables
std::string sig4(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt(v, "%.4g");
}

ordered_json config_json(const AnalysisConfig& c) {
  ordered_json j;
  j["weight_method"] = to_string(c.weight_method);
  j["estimator"] = to_string(c.estimator);
  j["mode"] = to_string(c.mode);
  j["q"] = c.q;
  j["sigma2_assumption"] = to_string(c.sigma2_assumption);
  if (c.sigma2_override) j["sigma2_override"] = *c.sigma2_override;
  j["grid_r2"] = c.grid_r2;
  j["grid_rho"] = c.grid_rho;
  j["seed"] = c.seed;
  return j;
}

AnalysisConfig config_from_json(const ordered_json& j) {
  AnalysisConfig c;
  c.weight_method = weight_method_from_string(j.at("weight_method"));
  c.estimator = estimator_style_from_string(j.at("estimator"));
  c.mode = analysis_mode_from_string(j.at("mode"));
  c.q = j.at("q");
  c.sigma2_assumption = sigma2_assumption_from_string(j.at("sigma2_assumption"));
  if (j.contains("sigma2_override")) c.sigma2_override = j.at("sigma2_override");
  c.grid_r2 = j.at("grid_r2");
  c.grid_rho = j.at("grid_rho");
  c.seed = j.at("seed");
  return c;
}

}  // namespace

std::string content_digest(const std::string& bytes) {
  // FNV-1a, 64-bit
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string emit_report(const ReportBundle& bundle, ReportFormat format) {
  if (format == ReportFormat::json) {
    ordered_json j;
    j["schema_version"] = kReportSchemaVersion;
    j["tool_version"] = bundle.tool_version;
    j["sample_digest"] = bundle.sample_digest;
    j["population_digest"] = bundle.population_digest;
    j["config"] = config_json(bundle.config);
    // Definition-1 normalization note: the sample augmentation term divides
    // by n with mean-one weights
    j["augmented_normalization"] = "mean_over_sample";
    j["estimates"] = ordered_json::array();
    for (const auto& e : bundle.estimates) {
      ordered_json je;
      je["value"] = e.value;
      je["style"] = to_string(e.style);
      je["n1"] = e.n1;
      je["n0"] = e.n0;
      j["estimates"].push_back(je);
    }
    {
      const auto& s = bundle.sensitivity;
      ordered_json js;
      js["estimate"] = s.estimate;
      js["q"] = s.q;
      js["rv"] = s.rv;
      js["cor_w_tau_hat"] = s.cor_w_tau_hat;
      js["rho_bound"] = s.rho_bound;
      js["sigma2_max"] = s.sigma2_max;
      js["var_w"] = s.var_w;
      js["mode"] = to_string(s.mode);
      js["cor_clamped"] = s.cor_clamped;
      js["cor_degenerate"] = s.cor_degenerate;
      js["sigma2_clamped"] = s.sigma2_clamped;
      j["sensitivity"] = js;
    }
    {
      const auto& b = bundle.variance_bounds;
      ordered_json jb;
      jb["lower"] = b.lower;
      jb["upper"] = b.upper;
      jb["assumption"] = to_string(b.assumption);
      jb["var_y1"] = b.var_y1;
      jb["var_y0"] = b.var_y0;
      jb["mean_tau"] = b.mean_tau;
      j["variance_bounds"] = jb;
    }
    if (bundle.xi_stats) {
      const auto& x = *bundle.xi_stats;
      ordered_json jx;
      jx["var_tau_hat"] = x.var_tau_hat;
      jx["cov_tauhat_xi"] = x.cov_tauhat_xi;
      jx["sigma2_xi_max"] = x.sigma2_xi_max;
      jx["clamped"] = x.clamped;
      j["xi_stats"] = jx;
    }
    j["benchmark"] = ordered_json::array();
    for (const auto& r : bundle.benchmark) {
      ordered_json jr;
      jr["label"] = r.label;
      jr["r2_loo"] = r.r2_loo;
      jr["rho_loo"] = r.rho_loo;
      jr["k_sigma"] = r.k_sigma;
      jr["k_rho"] = r.k_rho;
      jr["r2_bench"] = r.r2_bench;
      jr["rho_bench"] = r.rho_bench;
      jr["rho_bench_clamped"] = r.rho_bench_clamped;
      jr["bias"] = r.bias;
      jr["mrcs"] = r.mrcs_unbounded ? ordered_json("unbounded") : ordered_json(r.mrcs);
      jr["k_sigma_min"] = std::isinf(r.k_sigma_min) ? ordered_json("unbounded")
                                                    : ordered_json(r.k_sigma_min);
      jr["k_rho_min"] = std::isinf(r.k_rho_min) ? ordered_json("unbounded")
                                                : ordered_json(r.k_rho_min);
      jr["mrcs_unbounded"] = r.mrcs_unbounded;
      jr["k_min_unbounded"] = r.k_min_unbounded;
      jr["refit_converged"] = r.refit_converged;
      j["benchmark"].push_back(jr);
    }
    j["balance"] = ordered_json::array();
    for (const auto& r : bundle.balance) {
      ordered_json jr;
      jr["covariate"] = r.covariate;
      jr["sample_mean"] = r.sample_mean;
      jr["weighted_mean"] = r.weighted_mean;
      jr["population_mean"] = r.population_mean;
      jr["std_diff"] = r.std_diff;
      jr["weighted_std_diff"] = r.weighted_std_diff;
      jr["zero_variance"] = r.zero_variance;
      j["balance"].push_back(jr);
    }
    {
      const auto& e = bundle.extreme;
      ordered_json je;
      je["rho_max"] = e.rho_max;
      je["r2_max"] = e.r2_max;
      je["r2_max_minus"] = e.r2_max_minus;
      je["has_two_roots"] = e.has_two_roots;
      je["bias_max"] = std::isnan(e.bias_max) ? ordered_json(nullptr)
                                              : ordered_json(e.bias_max);
      j["extreme"] = je;
    }
    j["contour_path"] = bundle.contour_path;
    return j.dump(2) + "\n";
  }

  std::ostringstream os;
  os << "point estimates and sensitivity statistics\n";
  os << "  style       estimate     n1     n0   RV_q=" << sig4(bundle.sensitivity.q)
     << "\n";
  for (const auto& e : bundle.estimates) {
    char line[160];
    std::snprintf(line, sizeof(line), "  %-10s %9s %6lld %6lld   %s\n",
                  to_string(e.style).c_str(), sig4(e.value).c_str(),
                  static_cast<long long>(e.n1), static_cast<long long>(e.n0),
                  sig4(bundle.sensitivity.rv).c_str());
    os << line;
  }
  os << "\nsensitivity summary (" << to_string(bundle.sensitivity.mode) << ")\n";
  os << "  sigma2_max      " << sig4(bundle.sensitivity.sigma2_max)
     << (bundle.sensitivity.sigma2_clamped ? " (clamped)" : "") << "\n";
  os << "  var(w)          " << sig4(bundle.sensitivity.var_w) << "\n";
  os << "  cor(w,tau) est. " << sig4(bundle.sensitivity.cor_w_tau_hat)
     << (bundle.sensitivity.cor_clamped ? " (clamped)" : "")
     << (bundle.sensitivity.cor_degenerate ? " (degenerate)" : "") << "\n";
  os << "  rho bound       " << sig4(bundle.sensitivity.rho_bound) << "\n";
  os << "\nvariance bounds (" << to_string(bundle.variance_bounds.assumption) << ")\n";
  os << "  lower " << sig4(bundle.variance_bounds.lower) << "  upper "
     << sig4(bundle.variance_bounds.upper) << "\n";
  if (bundle.xi_stats) {
    os << "\nresidual effect variance\n";
    os << "  sigma2_xi_max " << sig4(bundle.xi_stats->sigma2_xi_max)
       << (bundle.xi_stats->clamped ? " (clamped)" : "") << "\n";
  }
  if (!bundle.balance.empty()) {
    os << "\ncovariate balance\n";
    os << "  covariate            sample     weighted   population "
          "std.diff   w.std.diff\n";
    for (const auto& r : bundle.balance) {
      char line[200];
      std::snprintf(line, sizeof(line), "  %-20s %-10s %-10s %-10s %-10s %s%s\n",
                    r.covariate.c_str(), sig4(r.sample_mean).c_str(),
                    sig4(r.weighted_mean).c_str(), sig4(r.population_mean).c_str(),
                    sig4(r.std_diff).c_str(), sig4(r.weighted_std_diff).c_str(),
                    r.zero_variance ? " (zero variance)" : "");
      os << line;
    }
  }
  if (!bundle.benchmark.empty()) {
    os << "\nformal benchmarking\n";
    os << "  label                R2_eps     rho        est.bias   MRCS       "
          "k_sigma_min  k_rho_min\n";
    for (const auto& r : bundle.benchmark) {
      if (!r.refit_converged) {
        os << "  " << r.label << "  (refit failed)\n";
        continue;
      }
      char line[240];
      std::snprintf(line, sizeof(line),
                    "  %-20s %-10s %-10s %-10s %-10s %-12s %s%s\n", r.label.c_str(),
                    sig4(r.r2_bench).c_str(), sig4(r.rho_bench).c_str(),
                    sig4(r.bias).c_str(),
                    r.mrcs_unbounded ? "unbounded" : sig4(r.mrcs).c_str(),
                    sig4(r.k_sigma_min).c_str(), sig4(r.k_rho_min).c_str(),
                    r.rho_bench_clamped ? " (rho clamped)" : "");
      os << line;
    }
  }
  os << "\nextreme scenario\n";
  os << "  rho_max " << sig4(bundle.extreme.rho_max) << "  R2_max "
     << sig4(bundle.extreme.r2_max);
  if (bundle.extreme.has_two_roots)
    os << " / " << sig4(bundle.extreme.r2_max_minus);
  if (!std::isnan(bundle.extreme.bias_max))
    os << "  bias_max " << sig4(bundle.extreme.bias_max);
  os << "\n";
  return os.str();
}

ReportBundle parse_report_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("report parse failure: ") + e.what());
  }
  if (j.value("schema_version", -1) != kReportSchemaVersion)
    throw Error("report: unsupported schema version");
  ReportBundle b;
  b.tool_version = j.at("tool_version");
  b.sample_digest = j.at("sample_digest");
  b.population_digest = j.at("population_digest");
  b.config = config_from_json(j.at("config"));
  for (const auto& je : j.at("estimates")) {
    PateEstimate e;
    e.value = je.at("value");
    e.style = estimator_style_from_string(je.at("style"));
    e.n1 = je.at("n1");
    e.n0 = je.at("n0");
    b.estimates.push_back(e);
  }
  {
    const auto& js = j.at("sensitivity");
    b.sensitivity.estimate = js.at("estimate");
    b.sensitivity.q = js.at("q");
    b.sensitivity.rv = js.at("rv");
    b.sensitivity.cor_w_tau_hat = js.at("cor_w_tau_hat");
    b.sensitivity.rho_bound = js.at("rho_bound");
    b.sensitivity.sigma2_max = js.at("sigma2_max");
    b.sensitivity.var_w = js.at("var_w");
    b.sensitivity.mode = analysis_mode_from_string(js.at("mode"));
    b.sensitivity.cor_clamped = js.at("cor_clamped");
    b.sensitivity.cor_degenerate = js.at("cor_degenerate");
    b.sensitivity.sigma2_clamped = js.at("sigma2_clamped");
  }
  {
    const auto& jb = j.at("variance_bounds");
    b.variance_bounds.lower = jb.at("lower");
    b.variance_bounds.upper = jb.at("upper");
    b.variance_bounds.assumption = sigma2_assumption_from_string(jb.at("assumption"));
    b.variance_bounds.var_y1 = jb.at("var_y1");
    b.variance_bounds.var_y0 = jb.at("var_y0");
    b.variance_bounds.mean_tau = jb.at("mean_tau");
  }
  if (j.contains("xi_stats")) {
    XiStats x;
    x.var_tau_hat = j["xi_stats"].at("var_tau_hat");
    x.cov_tauhat_xi = j["xi_stats"].at("cov_tauhat_xi");
    x.sigma2_xi_max = j["xi_stats"].at("sigma2_xi_max");
    x.clamped = j["xi_stats"].at("clamped");
    b.xi_stats = x;
  }
  for (const auto& jr : j.at("benchmark")) {
    BenchmarkResult r;
    r.label = jr.at("label");
    r.r2_loo = jr.at("r2_loo");
    r.rho_loo = jr.at("rho_loo");
    r.k_sigma = jr.at("k_sigma");
    r.k_rho = jr.at("k_rho");
    r.r2_bench = jr.at("r2_bench");
    r.rho_bench = jr.at("rho_bench");
    r.rho_bench_clamped = jr.at("rho_bench_clamped");
    r.bias = jr.at("bias");
    r.mrcs_unbounded = jr.at("mrcs_unbounded");
    r.k_min_unbounded = jr.at("k_min_unbounded");
    r.refit_converged = jr.at("refit_converged");
    r.mrcs = r.mrcs_unbounded ? std::numeric_limits<double>::infinity()
                              : double(jr.at("mrcs"));
    r.k_sigma_min = jr.at("k_sigma_min").is_string()
                        ? std::numeric_limits<double>::infinity()
                        : double(jr.at("k_sigma_min"));
    r.k_rho_min = jr.at("k_rho_min").is_string()
                      ? std::numeric_limits<double>::infinity()
                      : double(jr.at("k_rho_min"));
    b.benchmark.push_back(r);
  }
  for (const auto& jr : j.at("balance")) {
    BalanceRow r;
    r.covariate = jr.at("covariate");
    r.sample_mean = jr.at("sample_mean");
    r.weighted_mean = jr.at("weighted_mean");
    r.population_mean = jr.at("population_mean");
    r.std_diff = jr.at("std_diff");
    r.weighted_std_diff = jr.at("weighted_std_diff");
    r.zero_variance = jr.at("zero_variance");
    b.balance.push_back(r);
  }
  {
    const auto& je = j.at("extreme");
    b.extreme.rho_max = je.at("rho_max");
    b.extreme.r2_max = je.at("r2_max");
    b.extreme.r2_max_minus = je.at("r2_max_minus");
    b.extreme.has_two_roots = je.at("has_two_roots");
    b.extreme.bias_max = je.at("bias_max").is_null()
                             ? std::numeric_limits<double>::quiet_NaN()
                             : double(je.at("bias_max"));
  }
  b.contour_path = j.at("contour_path");
  return b;
}

namespace {

struct PlotFrame {
  double width, height;
  double left = 56, right = 16, top = 16, bottom = 44;
  double x0, x1, y0, y1;  // data ranges

  double px(double x) const {
    return left + (x - x0) / (x1 - x0) * (width - left - right);
  }
  double py(double y) const {
    return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom);
  }
};

void svg_header(std::ostringstream& os, double w, double h) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w, "%.0f")
     << "\" height=\"" << fmt(h, "%.0f") << "\" viewBox=\"0 0 " << fmt(w, "%.0f")
     << " " << fmt(h, "%.0f") << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void draw_axes(std::ostringstream& os, const PlotFrame& f, const std::string& xlabel,
               const std::string& ylabel) {
  os << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
  os << "<line x1=\"" << fmt(f.px(f.x0)) << "\" y1=\"" << fmt(f.py(f.y0))
     << "\" x2=\"" << fmt(f.px(f.x1)) << "\" y2=\"" << fmt(f.py(f.y0)) << "\"/>\n";
  os << "<line x1=\"" << fmt(f.px(f.x0)) << "\" y1=\"" << fmt(f.py(f.y0))
     << "\" x2=\"" << fmt(f.px(f.x0)) << "\" y2=\"" << fmt(f.py(f.y1)) << "\"/>\n";
  os << "</g>\n<g class=\"ticks\" font-size=\"11\" font-family=\"monospace\" "
        "fill=\"black\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
    os << "<text x=\"" << fmt(f.px(xv) - 12) << "\" y=\"" << fmt(f.py(f.y0) + 16)
       << "\">" << fmt(xv) << "</text>\n";
    os << "<text x=\"" << fmt(f.px(f.x0) - 46) << "\" y=\"" << fmt(f.py(yv) + 4)
       << "\">" << fmt(yv) << "</text>\n";
  }
  os << "<text x=\"" << fmt((f.px(f.x0) + f.px(f.x1)) / 2 - 20) << "\" y=\""
     << fmt(f.py(f.y0) + 34) << "\">" << xlabel << "</text>\n";
  os << "<text x=\"" << fmt(f.px(f.x0) - 46) << "\" y=\"" << fmt(f.py(f.y1) - 4)
     << "\">" << ylabel << "</text>\n";
  os << "</g>\n";
}

}  // namespace

std::string render_contour(const ContourGrid& grid, const ContourStyle& style) {
  const Eigen::Index nr = grid.rho_axis.size();
  const Eigen::Index nc = grid.r2_axis.size();
  if (nr < 2 || nc < 2 || grid.bias.rows() != nr || grid.bias.cols() != nc)
    throw Error("render_contour: empty or inconsistent grid");

  PlotFrame f;
  f.width = style.width;
  f.height = style.height;
  f.x0 = grid.r2_axis[0];
  f.x1 = grid.r2_axis[nc - 1];
  f.y0 = grid.rho_axis[0];
  f.y1 = grid.rho_axis[nr - 1];
  if (f.y0 == f.y1) {  // degenerate rho range
    f.y0 -= 1;
    f.y1 += 1;
  }

  std::ostringstream os;
  svg_header(os, f.width, f.height);

  // killer region: one cell polygon per masked grid point, truthful to the grid
  const double dx = (grid.r2_axis[nc - 1] - grid.r2_axis[0]) / (nc - 1);
  const double dy = (grid.rho_axis[nr - 1] - grid.rho_axis[0]) / std::max<Eigen::Index>(nr - 1, 1);
  os << "<g class=\"killer\" fill=\"#d88\" stroke=\"none\">\n";
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index j = 0; j < nc; ++j) {
      if (!grid.killer_mask(i, j)) continue;
      const double xl = std::max(f.x0, grid.r2_axis[j] - dx / 2);
      const double xr = std::min(f.x1, grid.r2_axis[j] + dx / 2);
      const double yl = std::max(f.y0, grid.rho_axis[i] - dy / 2);
      const double yh = std::min(f.y1, grid.rho_axis[i] + dy / 2);
      os << "<rect x=\"" << fmt(f.px(xl)) << "\" y=\"" << fmt(f.py(yh)) << "\" width=\""
         << fmt(f.px(xr) - f.px(xl)) << "\" height=\"" << fmt(f.py(yl) - f.py(yh))
         << "\"/>\n";
    }
  os << "</g>\n";

  // iso-bias contour lines by marching squares; saddle cells resolved by
  // comparing the level against the cell corner average
  const double bmin = grid.bias.minCoeff();
  const double bmax = grid.bias.maxCoeff();
  os << "<g class=\"contours\" stroke=\"#336\" fill=\"none\" stroke-width=\"1\">\n";
  std::ostringstream labels;
  labels << "<g class=\"contour-labels\" font-size=\"10\" font-family=\"monospace\" "
            "fill=\"#336\">\n";
  for (int lv = 1; lv <= style.n_levels; ++lv) {
    const double level = bmin + (bmax - bmin) * lv / (style.n_levels + 1);
    bool labeled = false;
    std::ostringstream path;
    for (Eigen::Index i = 0; i + 1 < nr; ++i)
      for (Eigen::Index j = 0; j + 1 < nc; ++j) {
        const double v00 = grid.bias(i, j);        // (x_j, y_i)
        const double v01 = grid.bias(i, j + 1);    // (x_{j+1}, y_i)
        const double v10 = grid.bias(i + 1, j);    // (x_j, y_{i+1})
        const double v11 = grid.bias(i + 1, j + 1);
        const int code = (v00 >= level ? 1 : 0) | (v01 >= level ? 2 : 0) |
                         (v11 >= level ? 4 : 0) | (v10 >= level ? 8 : 0);
        if (code == 0 || code == 15) continue;
        auto interp = [&](double a, double b, double pa, double pb) {
          const double t = (level - a) / (b - a);
          return pa + t * (pb - pa);
        };
        const double xj = grid.r2_axis[j], xj1 = grid.r2_axis[j + 1];
        const double yi = grid.rho_axis[i], yi1 = grid.rho_axis[i + 1];
        // edge crossings: bottom (v00-v01), right (v01-v11), top (v10-v11),
        // left (v00-v10)
        double ex[4] = {0, 0, 0, 0}, ey[4] = {0, 0, 0, 0};
        bool cross[4] = {(v00 >= level) != (v01 >= level),
                         (v01 >= level) != (v11 >= level),
                         (v10 >= level) != (v11 >= level),
                         (v00 >= level) != (v10 >= level)};
        if (cross[0]) { ex[0] = interp(v00, v01, xj, xj1); ey[0] = yi; }
        if (cross[1]) { ex[1] = xj1; ey[1] = interp(v01, v11, yi, yi1); }
        if (cross[2]) { ex[2] = interp(v10, v11, xj, xj1); ey[2] = yi1; }
        if (cross[3]) { ex[3] = xj; ey[3] = interp(v00, v10, yi, yi1); }
        auto seg = [&](int a, int b) {
          path << "M" << fmt(f.px(ex[a])) << " " << fmt(f.py(ey[a])) << "L"
               << fmt(f.px(ex[b])) << " " << fmt(f.py(ey[b]));
          if (!labeled) {
            labels << "<text x=\"" << fmt(f.px(ex[a]) + 2) << "\" y=\""
                   << fmt(f.py(ey[a]) - 2) << "\">" << fmt(level, "%.3g")
                   << "</text>\n";
            labeled = true;
          }
        };
        if (code == 5 || code == 10) {
          // saddle: connect according to the corner-average side
          const double avg = 0.25 * (v00 + v01 + v10 + v11);
          const bool center_high = avg >= level;
          if ((code == 5) == center_high) {
            seg(0, 1);
            seg(2, 3);
          } else {
            seg(0, 3);
            seg(1, 2);
          }
        } else {
          int pts[4], np = 0;
          for (int e = 0; e < 4; ++e)
            if (cross[e]) pts[np++] = e;
          if (np == 2) seg(pts[0], pts[1]);
        }
      }
    const std::string d = path.str();
    if (!d.empty()) os << "<path d=\"" << d << "\"/>\n";
  }
  os << "</g>\n" << labels.str() << "</g>\n";

  os << "<g class=\"benchmarks\" fill=\"black\" font-size=\"11\" "
        "font-family=\"monospace\">\n";
  for (const auto& b : grid.benchmark_points) {
    os << "<circle cx=\"" << fmt(f.px(b.r2)) << "\" cy=\"" << fmt(f.py(b.rho))
       << "\" r=\"3\"/>\n";
    os << "<text x=\"" << fmt(f.px(b.r2) + 5) << "\" y=\"" << fmt(f.py(b.rho) - 5)
       << "\">" << b.label << "</text>\n";
  }
  os << "</g>\n";

  draw_axes(os, f, "R2_eps", "rho");
  os << "</svg>\n";
  return os.str();
}

std::string render_extreme_plot(double estimate, double sigma2, double var_w,
                                double cor_w_tau, const std::vector<double>& c_star,
                                const ExtremeStyle& style) {
  for (double c : c_star)
    if (c < -1.0 || c > 1.0)
      throw Error("render_extreme_plot: c* outside [-1,1]");
  const double r2_cap = 0.99;
  const double scale = std::sqrt(var_w * sigma2);
  // adjusted estimate along the Lemma-constrained path:
  // bias(R2; c*) = sqrt(var_w sigma2) (cor - c*/sqrt(1-R2))
  auto adjusted = [&](double c, double r2) {
    return estimate - scale * (cor_w_tau - c / std::sqrt(1.0 - r2));
  };

  PlotFrame f;
  f.width = style.width;
  f.height = style.height;
  f.x0 = 0;
  f.x1 = r2_cap;
  f.y0 = estimate;
  f.y1 = estimate;
  for (double c : c_star)
    for (int k = 0; k < style.n_points; ++k) {
      const double r2 = r2_cap * k / (style.n_points - 1);
      const double y = adjusted(c, r2);
      f.y0 = std::min(f.y0, y);
      f.y1 = std::max(f.y1, y);
    }
  if (f.y0 == f.y1) {
    f.y0 -= 1;
    f.y1 += 1;
  }

  std::ostringstream os;
  svg_header(os, f.width, f.height);

  // reference line at the unadjusted estimate
  os << "<line stroke=\"#999\" stroke-dasharray=\"2 3\" x1=\"" << fmt(f.px(f.x0))
     << "\" y1=\"" << fmt(f.py(estimate)) << "\" x2=\"" << fmt(f.px(f.x1))
     << "\" y2=\"" << fmt(f.py(estimate)) << "\"/>\n";
  if (f.y0 < 0.0 && f.y1 > 0.0)
    os << "<line stroke=\"#999\" x1=\"" << fmt(f.px(f.x0)) << "\" y1=\""
       << fmt(f.py(0.0)) << "\" x2=\"" << fmt(f.px(f.x1)) << "\" y2=\""
       << fmt(f.py(0.0)) << "\"/>\n";

  os << "<g class=\"curves\" fill=\"none\" stroke-width=\"1.5\">\n";
  for (double c : c_star) {
    bool flips = false;
    for (int k = 0; k < style.n_points; ++k) {
      const double r2 = r2_cap * k / (style.n_points - 1);
      if ((adjusted(c, r2) > 0) != (estimate > 0)) {
        flips = true;
        break;
      }
    }
    os << "<path stroke=\"" << (flips ? "#b22" : "#226") << "\""
       << (flips ? " stroke-dasharray=\"5 3\"" : "") << " d=\"";
    for (int k = 0; k < style.n_points; ++k) {
      const double r2 = r2_cap * k / (style.n_points - 1);
      os << (k == 0 ? "M" : "L") << fmt(f.px(r2)) << " " << fmt(f.py(adjusted(c, r2)));
    }
    os << "\"/>\n";
    os << "<text font-size=\"10\" font-family=\"monospace\" fill=\"black\" x=\""
       << fmt(f.px(r2_cap) - 60) << "\" y=\"" << fmt(f.py(adjusted(c, r2_cap)) - 3)
       << "\">c*=" << fmt(c) << "</text>\n";
  }
  os << "</g>\n";

  draw_axes(os, f, "R2_eps", "adj. est.");
  os << "</svg>\n";
  return os.str();
}

}  // namespace gsens
