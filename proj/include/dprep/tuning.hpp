// Copyright 2026 The dprep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Bayesian optimization: Gaussian-process surrogate with a Matern-5/2 ARD
// kernel, expected improvement, Latin-hypercube start. Maximizes.

#ifndef DPREP_TUNING_HPP
#define DPREP_TUNING_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dprep {

/// Half-open interval (lo, hi].
struct ParameterBound {
  std::string name;
  double lo = 0.0;
  double hi = 0.1;
};

using Objective = std::function<double(const std::vector<double>&)>;

struct OptimizationProblem {
  std::vector<ParameterBound> bounds;
  Objective objective;
  int budget = 100;
  int initial_design = 10;
  std::uint64_t seed = 0;
  /// Points proposed per surrogate update (constant liar) and run in parallel.
  int batch = 1;
  int workers = 1;
  /// Value recorded when the objective throws or returns a non-finite value.
  /// NaN means the worst finite value seen so far (0 before any).
  double failure_value = std::numeric_limits<double>::quiet_NaN();
};

struct Evaluation {
  int iteration = 0;
  std::vector<double> x;
  double value = 0.0;
  bool failed = false;
  double incumbent = 0.0;  // best value up to and including this evaluation
};

struct OptimizationResult {
  std::vector<double> best_x;
  double best_value = 0.0;
  std::vector<Evaluation> history;
};

OptimizationResult optimize_params(const OptimizationProblem& problem);

/// CSV: iteration, one column per parameter, objective, incumbent, failed.
void write_optimization_log(std::ostream& os, const std::vector<ParameterBound>& bounds,
                            const OptimizationResult& result);

// Building blocks, exposed for testing.

/// Uniform double in [0, 1) from the top 53 bits.
double uniform_double(std::mt19937_64& rng);

/// n points in the unit cube, one per stratum in every dimension.
std::vector<Eigen::VectorXd> latin_hypercube(int n, int dim, std::mt19937_64& rng);

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
};
/// Minimizes f from x0 with initial simplex edge `step`.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                             double step, int max_iterations = 2000, double tol = 1e-10);

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& lengths, double variance);

/// GP regression on standardized targets with fitted kernel hyperparameters.
class GaussianProcess {
 public:
  /// Fits lengths, signal variance and noise by maximizing the marginal likelihood.
  void fit(const std::vector<Eigen::VectorXd>& x, const std::vector<double>& y);
  /// Refits the posterior with the current hyperparameters.
  void condition(const std::vector<Eigen::VectorXd>& x, const std::vector<double>& y);
  /// Posterior mean and standard deviation in the original units.
  void predict(const Eigen::VectorXd& x, double& mean, double& sd) const;
  double log_marginal_likelihood() const { return lml_; }
  const Eigen::VectorXd& lengths() const { return lengths_; }
  double noise() const { return noise_; }

 private:
  double factorize();
  std::vector<Eigen::VectorXd> x_;
  Eigen::VectorXd y_;
  double y_mean_ = 0.0, y_scale_ = 1.0;
  Eigen::VectorXd lengths_;
  double variance_ = 1.0, noise_ = 1e-6;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double lml_ = 0.0;
};

double expected_improvement(double mean, double sd, double best);

}  // namespace dprep

#endif  // DPREP_TUNING_HPP
