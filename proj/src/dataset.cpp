#include "gsens/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "gsens/error.hpp"
#include "gsens/stats.hpp"

namespace gsens {

std::string to_string(WeightMethod m) {
  switch (m) {
    case WeightMethod::entropy: return "entropy";
    case WeightMethod::ipw_logistic: return "ipw_logistic";
    case WeightMethod::uniform: return "uniform";
    case WeightMethod::external: return "external";
  }
  return "?";
}

std::string to_string(EstimatorStyle s) {
  switch (s) {
    case EstimatorStyle::dim: return "dim";
    case EstimatorStyle::ht: return "ht";
    case EstimatorStyle::hajek: return "hajek";
    case EstimatorStyle::augmented: return "augmented";
  }
  return "?";
}

std::string to_string(Sigma2Assumption a) {
  switch (a) {
    case Sigma2Assumption::none: return "none";
    case Sigma2Assumption::cov_y0_tau_nonneg: return "cov_y0_tau_nonneg";
    case Sigma2Assumption::po_corr_nonneg: return "po_corr_nonneg";
    case Sigma2Assumption::po_corr_negative: return "po_corr_negative";
  }
  return "?";
}

std::string to_string(AnalysisMode m) {
  return m == AnalysisMode::weighted ? "weighted" : "augmented";
}

namespace {

// accept hyphens as underscores so CLI spellings round-trip
std::string canon(const std::string& s) {
  std::string out = s;
  std::replace(out.begin(), out.end(), '-', '_');
  return out;
}

}  // namespace

WeightMethod weight_method_from_string(const std::string& s) {
  const std::string c = canon(s);
  if (c == "entropy") return WeightMethod::entropy;
  if (c == "ipw_logistic" || c == "ipw") return WeightMethod::ipw_logistic;
  if (c == "uniform") return WeightMethod::uniform;
  if (c == "external") return WeightMethod::external;
  throw Error("unknown weight method '" + s + "'");
}

EstimatorStyle estimator_style_from_string(const std::string& s) {
  const std::string c = canon(s);
  if (c == "dim") return EstimatorStyle::dim;
  if (c == "ht") return EstimatorStyle::ht;
  if (c == "hajek") return EstimatorStyle::hajek;
  if (c == "augmented") return EstimatorStyle::augmented;
  throw Error("unknown estimator style '" + s + "'");
}

Sigma2Assumption sigma2_assumption_from_string(const std::string& s) {
  const std::string c = canon(s);
  if (c == "none") return Sigma2Assumption::none;
  if (c == "cov_y0_tau_nonneg") return Sigma2Assumption::cov_y0_tau_nonneg;
  if (c == "po_corr_nonneg") return Sigma2Assumption::po_corr_nonneg;
  if (c == "po_corr_negative") return Sigma2Assumption::po_corr_negative;
  throw Error("unknown sigma2 assumption '" + s + "'");
}

AnalysisMode analysis_mode_from_string(const std::string& s) {
  const std::string c = canon(s);
  if (c == "weighted") return AnalysisMode::weighted;
  if (c == "augmented") return AnalysisMode::augmented;
  throw Error("unknown analysis mode '" + s + "'");
}

Eigen::VectorXd ExperimentalSample::treated_outcomes() const {
  Eigen::VectorXd out(n_treated());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n(); ++i)
    if (treatment[i] == 1.0) out[k++] = outcome[i];
  return out;
}

Eigen::VectorXd ExperimentalSample::control_outcomes() const {
  Eigen::VectorXd out(n_control());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n(); ++i)
    if (treatment[i] == 0.0) out[k++] = outcome[i];
  return out;
}

namespace {

void check_names(const std::vector<std::string>& names, Eigen::Index p,
                 const std::string& what) {
  if (static_cast<Eigen::Index>(names.size()) != p)
    throw Error(what + ": covariate name count (" + std::to_string(names.size()) +
                ") does not match column count (" + std::to_string(p) + ")");
  std::set<std::string> seen;
  for (const auto& nm : names)
    if (!seen.insert(nm).second)
      throw Error(what + ": duplicate covariate name '" + nm + "'");
}

void check_finite(const Eigen::MatrixXd& m, const std::string& what) {
  if (!m.allFinite()) throw Error(what + ": non-finite entry");
}

}  // namespace

void ExperimentalSample::validate() const {
  check_names(covariate_names, p(), "sample");
  if (treatment.size() != n() || outcome.size() != n())
    throw Error("sample: treatment/outcome length does not match covariate rows");
  check_finite(covariates, "sample covariates");
  check_finite(outcome, "sample outcome");
  for (Eigen::Index i = 0; i < n(); ++i)
    if (treatment[i] != 0.0 && treatment[i] != 1.0)
      throw Error("sample: treatment not coded {0,1} at row " + std::to_string(i + 1));
  if (n_treated() < 2 || n_control() < 2)
    throw Error("sample: each treatment arm needs at least 2 units (treated " +
                std::to_string(n_treated()) + ", control " + std::to_string(n_control()) +
                ")");
  if (external_weights) {
    if (external_weights->size() != n())
      throw Error("sample: external weights length mismatch");
    check_finite(*external_weights, "sample external weights");
  }
}

void TargetPopulation::validate() const {
  check_names(covariate_names, p(), "population");
  if (n() < 2) throw Error("population: needs at least 2 rows");
  check_finite(covariates, "population covariates");
}

void AnalysisConfig::validate() const {
  if (!(q > 0.0 && q <= 1.0)) throw Error("config: q must be in (0, 1]");
  if (grid_r2 < 2 || grid_rho < 2)
    throw Error("config: grid resolution must be at least 2 per axis");
  if (sigma2_override && !(*sigma2_override > 0.0))
    throw Error("config: sigma2_override must be positive");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;  // all numeric, complete
};

RawTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file '" + path + "'");
  RawTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error("'" + path + "': empty file");
  for (auto& h : split_csv_line(line)) t.header.push_back(trim(h));
  std::vector<std::string> bad_rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) {
      bad_rows.push_back("row " + std::to_string(lineno) + " (cell count " +
                         std::to_string(cells.size()) + " != " +
                         std::to_string(t.header.size()) + ")");
      continue;
    }
    std::vector<double> vals;
    vals.reserve(cells.size());
    bool ok = true;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string cell = trim(cells[j]);
      if (cell.empty()) {
        bad_rows.push_back("row " + std::to_string(lineno) + " (missing '" +
                           t.header[j] + "')");
        ok = false;
        break;
      }
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw Error("'" + path + "': non-numeric cell '" + cell + "' in column '" +
                    t.header[j] + "', row " + std::to_string(lineno));
      }
      vals.push_back(v);
    }
    if (ok) t.rows.push_back(std::move(vals));
  }
  if (!bad_rows.empty()) {
    std::string msg = "'" + path + "': rows with missing cells rejected: ";
    for (std::size_t i = 0; i < bad_rows.size(); ++i) {
      if (i) msg += "; ";
      msg += bad_rows[i];
    }
    throw Error(msg);
  }
  return t;
}

int find_col(const RawTable& t, const std::string& name, const std::string& path) {
  for (std::size_t j = 0; j < t.header.size(); ++j)
    if (t.header[j] == name) return static_cast<int>(j);
  throw Error("'" + path + "': column '" + name + "' not found");
}

}  // namespace

ExperimentalSample load_sample(const std::string& path, const ColumnSchema& schema) {
  if (schema.treatment_col.empty() || schema.outcome_col.empty())
    throw Error("sample schema needs treatment and outcome column names");
  RawTable t = read_csv(path);
  const int tc = find_col(t, schema.treatment_col, path);
  const int oc = find_col(t, schema.outcome_col, path);
  int wc = -1;
  if (!schema.weights_col.empty()) wc = find_col(t, schema.weights_col, path);

  std::vector<int> cov_cols;
  ExperimentalSample s;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    const int ji = static_cast<int>(j);
    if (ji == tc || ji == oc || ji == wc) continue;
    cov_cols.push_back(ji);
    s.covariate_names.push_back(t.header[j]);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  s.covariates.resize(n, static_cast<Eigen::Index>(cov_cols.size()));
  s.treatment.resize(n);
  s.outcome.resize(n);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    s.treatment[i] = row[static_cast<std::size_t>(tc)];
    s.outcome[i] = row[static_cast<std::size_t>(oc)];
    if (wc >= 0) w[i] = row[static_cast<std::size_t>(wc)];
    for (std::size_t k = 0; k < cov_cols.size(); ++k)
      s.covariates(i, static_cast<Eigen::Index>(k)) =
          row[static_cast<std::size_t>(cov_cols[k])];
  }
  if (wc >= 0) s.external_weights = w;
  s.validate();
  return s;
}

TargetPopulation load_population(const std::string& path) {
  RawTable t = read_csv(path);
  TargetPopulation p;
  p.covariate_names = t.header;
  const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  p.covariates.resize(n, static_cast<Eigen::Index>(t.header.size()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p.covariates.cols(); ++j)
      p.covariates(i, j) = t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  p.validate();
  return p;
}

namespace {

void write_value(std::ostream& os, double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  os << ss.str();
}

}  // namespace

void write_sample_csv(const std::string& path, const ExperimentalSample& s) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "treatment,outcome";
  if (s.external_weights) out << ",weight";
  for (const auto& nm : s.covariate_names) out << "," << nm;
  out << "\n";
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    write_value(out, s.treatment[i]);
    out << ",";
    write_value(out, s.outcome[i]);
    if (s.external_weights) {
      out << ",";
      write_value(out, (*s.external_weights)[i]);
    }
    for (Eigen::Index j = 0; j < s.p(); ++j) {
      out << ",";
      write_value(out, s.covariates(i, j));
    }
    out << "\n";
  }
}

void write_population_csv(const std::string& path, const TargetPopulation& p) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  for (Eigen::Index j = 0; j < p.p(); ++j) {
    if (j) out << ",";
    out << p.covariate_names[static_cast<std::size_t>(j)];
  }
  out << "\n";
  for (Eigen::Index i = 0; i < p.n(); ++i) {
    for (Eigen::Index j = 0; j < p.p(); ++j) {
      if (j) out << ",";
      write_value(out, p.covariates(i, j));
    }
    out << "\n";
  }
}

AnalysisInput align(const ExperimentalSample& sample, const TargetPopulation& population,
                    const AnalysisConfig& config) {
  sample.validate();
  population.validate();
  config.validate();

  std::vector<std::string> missing_in_pop, missing_in_sample;
  std::vector<Eigen::Index> perm;  // population column for each sample column
  for (const auto& nm : sample.covariate_names) {
    auto it = std::find(population.covariate_names.begin(),
                        population.covariate_names.end(), nm);
    if (it == population.covariate_names.end())
      missing_in_pop.push_back(nm);
    else
      perm.push_back(it - population.covariate_names.begin());
  }
  for (const auto& nm : population.covariate_names)
    if (std::find(sample.covariate_names.begin(), sample.covariate_names.end(), nm) ==
        sample.covariate_names.end())
      missing_in_sample.push_back(nm);
  if (!missing_in_pop.empty() || !missing_in_sample.empty()) {
    std::string msg = "covariate mismatch:";
    for (const auto& nm : missing_in_pop) msg += " '" + nm + "' absent in population;";
    for (const auto& nm : missing_in_sample) msg += " '" + nm + "' absent in sample;";
    throw Error(msg);
  }

  AnalysisInput input;
  input.sample = sample;
  input.config = config;
  input.population.covariate_names = sample.covariate_names;
  input.population.covariates.resize(population.n(), population.p());
  for (std::size_t j = 0; j < perm.size(); ++j)
    input.population.covariates.col(static_cast<Eigen::Index>(j)) =
        population.covariates.col(perm[j]);

  for (Eigen::Index j = 0; j < sample.p(); ++j) {
    const bool const_s = stats::var(sample.covariates.col(j)) == 0.0;
    const bool const_p = stats::var(input.population.covariates.col(j)) == 0.0;
    const auto& nm = sample.covariate_names[static_cast<std::size_t>(j)];
    if (const_s && const_p) {
      if (sample.covariates(0, j) != input.population.covariates(0, j))
        throw Error("covariate '" + nm +
                    "' is constant in both datasets with different values");
      input.constant_in_both.push_back(nm);
    } else if (const_s) {
      throw Error("covariate '" + nm +
                  "' is constant in the sample; zero variance blocks weight fitting");
    }
  }
  return input;
}

AnalysisConfig parse_config_text(const std::string& text) {
  AnalysisConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    try {
      if (key == "weight_method") {
        cfg.weight_method = weight_method_from_string(val);
      } else if (key == "estimator") {
        cfg.estimator = estimator_style_from_string(val);
      } else if (key == "mode") {
        cfg.mode = analysis_mode_from_string(val);
      } else if (key == "q") {
        cfg.q = std::stod(val);
      } else if (key == "sigma2_assumption") {
        cfg.sigma2_assumption = sigma2_assumption_from_string(val);
      } else if (key == "sigma2_override") {
        cfg.sigma2_override = std::stod(val);
      } else if (key == "grid_r2") {
        cfg.grid_r2 = std::stoi(val);
      } else if (key == "grid_rho") {
        cfg.grid_rho = std::stoi(val);
      } else if (key == "seed") {
        cfg.seed = std::stoull(val);
      } else {
        throw Error("config line " + std::to_string(lineno) + ": unknown key '" + key +
                    "'");
      }
    } catch (const std::invalid_argument&) {
      throw Error("config line " + std::to_string(lineno) + ": bad value '" + val +
                  "' for key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

AnalysisConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace gsens
