#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gsens/benchmark.hpp"
#include "gsens/dataset.hpp"
#include "gsens/estimators.hpp"
#include "gsens/sensitivity.hpp"
#include "gsens/weights.hpp"

namespace gsens {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

struct ReportBundle {
  std::vector<PateEstimate> estimates;
  SensitivitySummary sensitivity;
  VarianceBounds variance_bounds;
  std::optional<XiStats> xi_stats;
  std::vector<BenchmarkResult> benchmark;
  std::vector<BalanceRow> balance;
  ExtremeScenario extreme;
  std::string contour_path;  // reference to the rendered grid, if any
  std::string tool_version = kToolVersion;
  std::string sample_digest;
  std::string population_digest;
  AnalysisConfig config;
};

enum class ReportFormat { json, text };

// Machine-readable report (stable field names, versioned schema, full
// precision) or aligned text tables. Deterministic byte-for-byte.
std::string emit_report(const ReportBundle& bundle, ReportFormat format);

ReportBundle parse_report_json(const std::string& text);

struct ContourStyle {
  double width = 640;
  double height = 480;
  int n_levels = 8;  // iso-bias contour lines
};

// SVG contour plot: x = R2_eps, y = rho, marching-squares iso-bias lines
// (saddles resolved by the cell-average rule), shaded killer region, labeled
// benchmark points.
std::string render_contour(const ContourGrid& grid, const ContourStyle& style = {});

struct ExtremeStyle {
  double width = 640;
  double height = 480;
  int n_points = 200;  // R2 samples per curve
};

inline const std::vector<double> kDefaultCStar = {-0.9, -0.5, -0.25, 0.25, 0.5, 0.9};

// SVG extreme-scenario plot: adjusted estimate vs R2_eps, one curve per c*
// (rho = c* * sqrt(1 - cor^2) direction convention), sign-flipping curves
// drawn dashed.
std::string render_extreme_plot(double estimate, double sigma2, double var_w,
                                double cor_w_tau, const std::vector<double>& c_star,
                                const ExtremeStyle& style = {});

// Stable content digest for input provenance (FNV-1a over the byte stream).
std::string content_digest(const std::string& bytes);

}  // namespace gsens
