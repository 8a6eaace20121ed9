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

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "dprep/tuning.hpp"
#include "dprep/types.hpp"

using namespace dprep;
using doctest::Approx;

namespace {

OptimizationProblem quadratic(double x0, double y0) {
  OptimizationProblem p;
  p.bounds = {{"omega", 0.0, 0.1}, {"gamma", 0.0, 0.1}};
  p.objective = [=](const std::vector<double>& x) {
    return 1.0 - 100.0 * ((x[0] - x0) * (x[0] - x0) + (x[1] - y0) * (x[1] - y0));
  };
  p.budget = 30;
  p.initial_design = 10;
  p.seed = 7;
  return p;
}

}  // namespace

TEST_CASE("quadratic optimum is found") {
  const OptimizationProblem p = quadratic(0.031, 0.072);
  const OptimizationResult r = optimize_params(p);
  REQUIRE(r.history.size() == 30);
  CHECK(std::abs(r.best_x[0] - 0.031) < 0.005);
  CHECK(std::abs(r.best_x[1] - 0.072) < 0.005);
  CHECK(r.best_value == r.history.back().incumbent);
}

TEST_CASE("incumbent is monotone and points respect the bounds") {
  const OptimizationResult r = optimize_params(quadratic(0.09, 0.01));
  double prev = -1e300;
  for (size_t i = 0; i < r.history.size(); ++i) {
    const Evaluation& e = r.history[i];
    CHECK(e.iteration == static_cast<int>(i) + 1);
    CHECK(e.incumbent >= prev);
    CHECK(e.incumbent >= e.value);
    prev = e.incumbent;
    for (double v : e.x) {
      CHECK(v > 0.0);
      CHECK(v <= 0.1);
    }
  }
}

TEST_CASE("budget equal to the initial design evaluates only the design") {
  OptimizationProblem p = quadratic(0.05, 0.05);
  p.budget = 10;
  CHECK(optimize_params(p).history.size() == 10);
  p.budget = 9;
  CHECK_THROWS_AS(optimize_params(p), ConfigError);
  p.budget = 10;
  p.bounds[1].hi = p.bounds[1].lo;
  CHECK_THROWS_AS(optimize_params(p), ConfigError);
  p.bounds.clear();
  CHECK_THROWS_AS(optimize_params(p), ConfigError);
}

TEST_CASE("optimization is deterministic") {
  OptimizationProblem p = quadratic(0.02, 0.06);
  p.budget = 16;
  p.batch = 3;
  const OptimizationResult a = optimize_params(p);
  p.workers = 3;
  const OptimizationResult b = optimize_params(p);
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].x == b.history[i].x);
    CHECK(a.history[i].value == b.history[i].value);
  }
  p.seed = 8;
  CHECK(optimize_params(p).history[0].x != a.history[0].x);
}

TEST_CASE("failed evaluations take the penalty value") {
  OptimizationProblem p = quadratic(0.02, 0.02);
  p.budget = 14;
  const auto inner = p.objective;
  p.objective = [inner](const std::vector<double>& x) {
    if (x[0] > 0.06) throw std::runtime_error("blew up");
    if (x[1] > 0.08) return std::nan("");
    return inner(x);
  };
  const OptimizationResult r = optimize_params(p);
  int failures = 0;
  double worst = 1e300;
  for (const Evaluation& e : r.history) {
    if (e.failed) {
      ++failures;
      CHECK(e.value == (worst == 1e300 ? 0.0 : worst));
    } else {
      worst = std::min(worst, e.value);
    }
  }
  CHECK(failures > 0);  // the design covers both failure regions

  p.failure_value = -5.0;
  for (const Evaluation& e : optimize_params(p).history)
    if (e.failed) CHECK(e.value == -5.0);
}

TEST_CASE("Latin hypercube has one point per stratum") {
  std::mt19937_64 rng(3);
  const int n = 12, dim = 4;
  const auto pts = latin_hypercube(n, dim, rng);
  REQUIRE(pts.size() == static_cast<size_t>(n));
  for (int d = 0; d < dim; ++d) {
    std::set<int> strata;
    for (const auto& x : pts) {
      CHECK(x(d) >= 0.0);
      CHECK(x(d) < 1.0);
      strata.insert(static_cast<int>(std::floor(x(d) * n)));
    }
    CHECK(strata.size() == static_cast<size_t>(n));
  }
}

TEST_CASE("uniform doubles") {
  std::mt19937_64 rng(0);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = uniform_double(rng);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 20000 == Approx(0.5).epsilon(0.02));
}

TEST_CASE("Nelder-Mead minimizes Rosenbrock") {
  auto rosen = [](const Eigen::VectorXd& x) {
    return 100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2);
  };
  const NelderMeadResult r = nelder_mead(rosen, Eigen::Vector2d(-1.2, 1.0), 0.5, 5000, 1e-14);
  CHECK(r.x(0) == Approx(1.0).epsilon(1e-4));
  CHECK(r.x(1) == Approx(1.0).epsilon(1e-4));
  CHECK(r.value < 1e-8);
}

TEST_CASE("Matern kernel") {
  const Eigen::VectorXd a = Eigen::Vector2d(0.1, 0.2), l = Eigen::Vector2d(0.5, 2.0);
  CHECK(matern52(a, a, l, 1.7) == Approx(1.7));
  // r = 1 along the first axis: (1 + sqrt5 + 5/3) e^-sqrt5
  const Eigen::VectorXd b = Eigen::Vector2d(0.6, 0.2);
  const double s5 = std::sqrt(5.0);
  CHECK(matern52(a, b, l, 1.0) == Approx((1.0 + s5 + 5.0 / 3.0) * std::exp(-s5)));
  CHECK(matern52(a, b, l, 1.0) == Approx(matern52(b, a, l, 1.0)));
  CHECK(matern52(a, Eigen::Vector2d(1.1, 0.2), l, 1.0) < matern52(a, b, l, 1.0));
}

TEST_CASE("GP interpolates smooth data") {
  std::vector<Eigen::VectorXd> x;
  std::vector<double> y;
  for (int i = 0; i < 9; ++i) {
    const double u = i / 8.0;
    x.push_back(Eigen::VectorXd::Constant(1, u));
    y.push_back(std::sin(4.0 * u) + 3.0);
  }
  GaussianProcess gp;
  gp.fit(x, y);
  double mean = 0.0, sd = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    gp.predict(x[i], mean, sd);
    CHECK(mean == Approx(y[i]).epsilon(1e-2));
  }
  gp.predict(Eigen::VectorXd::Constant(1, 0.5 / 8.0), mean, sd);
  CHECK(mean == Approx(std::sin(0.25) + 3.0).epsilon(2e-2));
  double far_sd = 0.0;
  gp.predict(Eigen::VectorXd::Constant(1, 3.0), mean, far_sd);
  CHECK(far_sd > sd);
  CHECK_THROWS_AS(gp.fit({}, {}), ConfigError);
}

TEST_CASE("expected improvement") {
  CHECK(expected_improvement(2.0, 0.0, 1.0) == Approx(1.0));
  CHECK(expected_improvement(0.5, 0.0, 1.0) == 0.0);
  // at mean == best, EI = sd / sqrt(2 pi)
  CHECK(expected_improvement(1.0, 0.3, 1.0) == Approx(0.3 / std::sqrt(2.0 * M_PI)));
  CHECK(expected_improvement(1.0, 0.6, 1.0) > expected_improvement(1.0, 0.3, 1.0));
}

TEST_CASE("optimization log") {
  OptimizationProblem p = quadratic(0.05, 0.05);
  p.budget = 12;
  const OptimizationResult r = optimize_params(p);
  std::ostringstream os;
  write_optimization_log(os, p.bounds, r);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "iteration,omega,gamma,objective,incumbent,failed");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 12);
}
