#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "gsens/dataset.hpp"
#include "gsens/rng.hpp"

namespace testutil {

// scratch directory removed on destruction
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("gsens_test_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// T=(1,1,0,0), Y=(1,3,2,2), two informative covariates
inline gsens::ExperimentalSample tiny_sample() {
  gsens::ExperimentalSample s;
  s.covariates.resize(4, 2);
  s.covariates << 0.0, 0.5, 1.0, -0.2, 0.0, 0.3, 1.0, 0.1;
  s.treatment.resize(4);
  s.treatment << 1, 1, 0, 0;
  s.outcome.resize(4);
  s.outcome << 1, 3, 2, 2;
  s.covariate_names = {"x1", "x2"};
  return s;
}

// random Gaussian sample and population with modest mean shift
inline gsens::ExperimentalSample random_sample(Eigen::Index n, Eigen::Index p,
                                               std::uint64_t seed) {
  auto rng = gsens::make_stream(seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  gsens::ExperimentalSample s;
  s.covariates.resize(n, p);
  s.treatment.resize(n);
  s.outcome.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.treatment[i] = (i < n / 2) ? 1.0 : 0.0;
    for (Eigen::Index j = 0; j < p; ++j) s.covariates(i, j) = gauss(rng);
    s.outcome[i] = s.covariates.row(i).sum() + 0.5 * s.treatment[i] + gauss(rng);
  }
  for (Eigen::Index j = 0; j < p; ++j)
    s.covariate_names.push_back("x" + std::to_string(j + 1));
  return s;
}

inline gsens::TargetPopulation random_population(Eigen::Index N, Eigen::Index p,
                                                 std::uint64_t seed, double shift = 0.3) {
  auto rng = gsens::make_stream(seed, 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  gsens::TargetPopulation pop;
  pop.covariates.resize(N, p);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < p; ++j) pop.covariates(i, j) = gauss(rng) + shift;
  for (Eigen::Index j = 0; j < p; ++j)
    pop.covariate_names.push_back("x" + std::to_string(j + 1));
  return pop;
}

}  // namespace testutil
