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

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "doctest.h"
#include "dprep/dynamics.hpp"

using namespace dprep;
using doctest::Approx;

namespace {

/// H = diag(0, delta) + rabi (|0><1| + |1><0|), L = sqrt(gamma) |0><1|.
LindbladProblem two_level(double delta, double rabi, double gamma) {
  LindbladProblem p;
  p.system_dim = 2;
  p.dimension = 2;
  p.static_diagonal = RealVector::Zero(2);
  p.static_diagonal(1) = delta;
  if (rabi != 0.0) {
    SparseMatrix x(2, 2);
    x.insert(0, 1) = rabi;
    x.insert(1, 0) = rabi;
    p.hermitian_terms.push_back({x, {}, {}, "drive"});
  }
  if (gamma != 0.0) {
    SparseMatrix l(2, 2);
    l.insert(0, 1) = std::sqrt(gamma);
    p.jumps.push_back({{{l, {}, {}, "decay"}}, "decay"});
  }
  return p;
}

Observable excited() {
  SparseMatrix e(2, 2);
  e.insert(1, 1) = 1.0;
  return operator_observable("excited", e);
}

StateVector up() {
  StateVector v = StateVector::Zero(2);
  v(1) = 1.0;
  return v;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) t[k] = a + (b - a) * k / (n - 1);
  return t;
}

/// Excited population of a resonantly labelled driven two-level atom in
/// steady state: rabi^2 / (delta^2 + gamma^2/4 + 2 rabi^2).
double fluorescence_population(double delta, double rabi, double gamma) {
  return rabi * rabi / (delta * delta + gamma * gamma / 4.0 + 2.0 * rabi * rabi);
}

}  // namespace

TEST_CASE("unitary evolution keeps purity and energy") {
  LindbladProblem p = two_level(0.7, 0.4, 0.0);
  const SparseMatrix h = p.hamiltonian(0.0);
  StateVector psi(2);
  psi << std::sqrt(0.3), Complex(0.0, std::sqrt(0.7));
  EvolveOptions opt;
  opt.ode.rtol = 1e-11;
  opt.ode.atol = 1e-13;
  const EvolveResult r =
      lindblad_evolve(p, density_matrix(psi), linspace(0.0, 30.0, 31), {operator_observable("energy", h), excited()}, opt);
  const double e0 = r.series[0].mean.front();
  for (double e : r.series[0].mean) CHECK(e == Approx(e0).epsilon(1e-8));
  CHECK(std::real((r.final_state * r.final_state).trace()) == Approx(1.0).epsilon(1e-8));
  // the population does oscillate
  const auto [lo, hi] = std::minmax_element(r.series[1].mean.begin(), r.series[1].mean.end());
  CHECK(*hi - *lo > 0.1);
}

TEST_CASE("two-level decay is exponential") {
  const double gamma = 0.8;
  const LindbladProblem p = two_level(0.3, 0.0, gamma);
  const std::vector<double> t = linspace(0.0, 6.0, 13);
  const EvolveResult r = lindblad_evolve(p, density_matrix(up()), t, {excited()});
  for (size_t k = 0; k < t.size(); ++k) CHECK(std::abs(r.series[0].mean[k] - std::exp(-gamma * t[k])) < 1e-6);
  CHECK(r.diagnostics.max_trace_error < 1e-9);
}

TEST_CASE("pure decay steady state is the ground state") {
  const SteadyStateResult ss = steady_state(two_level(0.3, 0.0, 0.5));
  CHECK(ss.kernel_dimension == 1);
  CHECK(std::abs(ss.rho(0, 0) - 1.0) < 1e-10);
  CHECK(std::abs(ss.rho(1, 1)) < 1e-10);
  CHECK(ss.residual < 1e-10);

  // no dissipation: every diagonal state is stationary
  CHECK(steady_state(two_level(0.3, 0.0, 0.0)).kernel_dimension == 2);
}

TEST_CASE("driven steady state matches resonance fluorescence") {
  for (double delta : {0.0, 0.4, -1.1}) {
    const double rabi = 0.35, gamma = 0.6;
    const LindbladProblem p = two_level(delta, rabi, gamma);
    const SteadyStateResult ss = steady_state(p);
    CHECK(std::real(ss.rho(1, 1)) == Approx(fluorescence_population(delta, rabi, gamma)).epsilon(1e-9));
    CHECK(std::real(ss.rho.trace()) == Approx(1.0));

    // long-time integration lands on the same state
    EvolveOptions opt;
    opt.ode.rtol = 1e-10;
    opt.ode.atol = 1e-12;
    const EvolveResult r = lindblad_evolve(p, density_matrix(up()), {0.0, 120.0}, {excited()}, opt);
    CHECK((r.final_state - ss.rho).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("Liouvillian preserves the trace") {
  const SparseMatrix l = liouvillian(two_level(0.2, 0.3, 0.7));
  REQUIRE(l.rows() == 4);
  // column-stacked: the diagonal of rho sits at 0 and 3
  const DenseMatrix d(l);
  for (Index c = 0; c < 4; ++c) CHECK(std::abs(d(0, c) + d(3, c)) < 1e-14);
}

TEST_CASE("density-matrix diagnostics") {
  const LindbladProblem p = two_level(0.5, 0.6, 0.4);
  const EvolveResult r = lindblad_evolve(p, density_matrix(up()), linspace(0.0, 20.0, 41), {excited()});
  CHECK(r.diagnostics.max_trace_error < 1e-8);
  CHECK(r.diagnostics.min_eigenvalue > -1e-8);
  CHECK(r.diagnostics.max_hermiticity_error < 1e-10);
  CHECK(r.diagnostics.steps > 0);
}

TEST_CASE("trajectories agree with the master equation") {
  const LindbladProblem p = two_level(0.5, 0.6, 0.4);
  const std::vector<double> t = linspace(0.0, 12.0, 7);
  const EvolveResult dense = lindblad_evolve(p, density_matrix(up()), t, {excited()});
  const TrajectoryResult mc = mcwf_run(p, up(), t, 2000, 11, {excited()});
  REQUIRE(mc.num_trajectories == 2000);
  for (size_t k = 1; k < t.size(); ++k) {
    INFO("t = " << t[k]);
    CHECK(std::abs(mc.series[0].mean[k] - dense.series[0].mean[k]) < 3.0 * mc.series[0].stderr_[k] + 1e-9);
  }
  CHECK(mc.total_jumps > 0);
}

TEST_CASE("trajectories with a rastered auxiliary agree with the master equation") {
  CouplingMatrix c = CouplingMatrix::Zero(2, 2);
  c(0, 1) = c(1, 0) = 1.0;
  const HermitianOperator h = build_xy(c);
  const HermitianOperator nop = number_operator(2);
  const SystemModel sys = eigen_system(2, full_subspace(diagonalize(h, &nop)));
  AuxiliarySpec a;
  a.role = AuxRole::source;
  a.J = 0.3;
  a.omega_drive = 0.3;
  a.gamma = 0.8;
  a.detuning = DetuningSchedule::sawtooth(-2.0, 0.0, 4.0);
  for (Frame frame : {Frame::lab, Frame::rotating}) {
    const LindbladProblem p = build_reduced_model(sys, {a}, frame);
    const StateVector psi = product_with_ground(p, sys.project(occupation_state(2, {})));
    const std::vector<double> t = linspace(0.0, 16.0, 5);
    const EvolveResult dense = lindblad_evolve(p, density_matrix(psi), t, {number_observable(sys)});
    const TrajectoryResult mc = mcwf_run(p, psi, t, 1000, 5, {number_observable(sys)});
    for (size_t k = 1; k < t.size(); ++k)
      CHECK(std::abs(mc.series[0].mean[k] - dense.series[0].mean[k]) < 3.0 * mc.series[0].stderr_[k] + 1e-9);
    CHECK(dense.series[0].mean.back() > 0.2);
  }
}

TEST_CASE("first jump times are exponentially distributed") {
  const double gamma = 1.0;
  const LindbladProblem p = two_level(0.0, 0.0, gamma);
  TrajectoryOptions opt;
  opt.record_jumps = true;
  const int n = 5000;
  const TrajectoryResult mc = mcwf_run(p, up(), {0.0, 15.0}, n, 2026, {excited()}, opt);
  REQUIRE(mc.jumps.size() == static_cast<size_t>(n));
  std::vector<double> first;
  for (const auto& j : mc.jumps) {
    REQUIRE(j.size() <= 1);  // the ground state cannot jump again
    if (!j.empty()) first.push_back(j.front().t);
  }
  // censoring at t = 15 loses e^-15 of the mass
  REQUIRE(first.size() == static_cast<size_t>(n));
  std::sort(first.begin(), first.end());
  double d = 0.0;
  for (size_t i = 0; i < first.size(); ++i) {
    const double cdf = 1.0 - std::exp(-gamma * first[i]);
    d = std::max({d, std::abs(cdf - static_cast<double>(i) / n), std::abs(cdf - static_cast<double>(i + 1) / n)});
  }
  CHECK(d < 1.36 / std::sqrt(static_cast<double>(n)));  // 5% critical value
}

TEST_CASE("standard error shrinks as one over root N") {
  const LindbladProblem p = two_level(0.5, 0.6, 0.4);
  const std::vector<double> t = {0.0, 3.0};
  const TrajectoryResult small = mcwf_run(p, up(), t, 400, 1, {excited()});
  const TrajectoryResult large = mcwf_run(p, up(), t, 1600, 2, {excited()});
  const double ratio = small.series[0].stderr_[1] / large.series[0].stderr_[1];
  CHECK(ratio == Approx(2.0).epsilon(0.2));
  CHECK(small.series[0].stderr_[1] == Approx(small.series[0].std[1] / 20.0));
}

TEST_CASE("trajectory ensembles are deterministic") {
  const LindbladProblem p = two_level(0.5, 0.6, 0.4);
  const std::vector<double> t = linspace(0.0, 5.0, 6);
  TrajectoryOptions one, three;
  three.workers = 3;
  const TrajectoryResult a = mcwf_run(p, up(), t, 24, 99, {excited()}, one);
  const TrajectoryResult b = mcwf_run(p, up(), t, 24, 99, {excited()}, three);
  const TrajectoryResult c = mcwf_run(p, up(), t, 24, 100, {excited()}, one);
  CHECK(a.samples == b.samples);
  CHECK(a.series[0].mean == b.series[0].mean);
  CHECK(a.samples != c.samples);
  // a trajectory depends only on (seed, index)
  const TrajectoryResult prefix = mcwf_run(p, up(), t, 10, 99, {excited()}, one);
  for (size_t k = 0; k < t.size(); ++k)
    for (size_t i = 0; i < 10; ++i) CHECK(prefix.samples[0][k][i] == a.samples[0][k][i]);
  CHECK(stream_seed(1, 0) != stream_seed(1, 1));
  CHECK(stream_seed(1, 0) != stream_seed(2, 0));
}

TEST_CASE("fidelity observable") {
  StateVector v(3);
  v << Complex(0.6, 0.0), Complex(0.0, 0.8), 0.0;
  const Observable f = fidelity_observable("target", v);
  CHECK(expect_system(f, v * v.adjoint()) == Approx(1.0));
  const DenseMatrix mixed = DenseMatrix::Identity(3, 3) / 3.0;
  CHECK(expect_system(f, mixed) == Approx(1.0 / 3.0));
  StateVector w(3);
  w << 0.8, Complex(0.0, -0.6), 0.0;  // orthogonal to v
  CHECK(expect_system(f, w * w.adjoint()) == Approx(0.0).scale(1.0));
  // a two-dimensional target space
  DenseMatrix two(3, 2);
  two << 1, 0, 0, 1, 0, 0;
  CHECK(expect_system(fidelity_observable("pair", two), mixed) == Approx(2.0 / 3.0));
}

TEST_CASE("product states and reduced states") {
  CouplingMatrix c = CouplingMatrix::Zero(2, 2);
  c(0, 1) = c(1, 0) = 1.0;
  const SystemModel sys = computational_system(build_xy(c));
  AuxiliarySpec a;
  a.gamma = 0.1;
  const LindbladProblem p = build_reduced_model(sys, {a, a});
  StateVector s(4);
  s << 0.0, 0.6, 0.8, 0.0;
  const StateVector psi = product_with_ground(p, s);
  CHECK(psi.size() == 36);
  CHECK(psi.norm() == Approx(1.0));
  CHECK((reduced_system_state(psi, 4) - s * s.adjoint()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((reduced_system_state(density_matrix(psi), 4) - s * s.adjoint()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(expect(aux_population_observable(p, 1, 'g'), psi, 4) == Approx(1.0));
}

TEST_CASE("sparse steady-state path agrees with the dense kernel") {
  // 36-dimensional composite: the Liouvillian (1296 rows) takes the sparse path
  CouplingMatrix c = CouplingMatrix::Zero(2, 2);
  c(0, 1) = c(1, 0) = 1.0;
  const SystemModel sys = computational_system(build_xy(c));
  AuxiliarySpec src, snk;
  src.role = AuxRole::source;
  snk.role = AuxRole::sink;
  src.J = snk.J = 0.05;
  src.omega_drive = snk.omega_drive = 0.05;
  src.gamma = snk.gamma = 0.05;
  src.detuning = DetuningSchedule::constant(1.0);
  snk.detuning = DetuningSchedule::constant(-1.0);
  src.attach = {1.0, 0.0};
  snk.attach = {0.0, 1.0};
  const LindbladProblem p = build_reduced_model(sys, {src, snk});
  const SteadyStateResult ss = steady_state(p);
  CHECK(ss.kernel_dimension == 1);
  CHECK(ss.residual < 1e-10);

  Eigen::FullPivLU<DenseMatrix> lu{DenseMatrix(liouvillian(p))};
  lu.setThreshold(1e-10);
  const DenseMatrix kernel = lu.kernel();
  REQUIRE(kernel.cols() == 1);
  DenseMatrix rho = Eigen::Map<const DenseMatrix>(kernel.col(0).data(), p.dimension, p.dimension);
  rho /= rho.trace();
  CHECK((rho - ss.rho).cwiseAbs().maxCoeff() < 1e-9);

  // switching the exchange off strands every system state
  src.J = snk.J = 0.0;
  const LindbladProblem stuck = build_reduced_model(sys, {src, snk});
  bool flagged = false;
  try {
    flagged = steady_state(stuck).kernel_dimension > 1;
  } catch (const NumericError&) {
    flagged = true;
  }
  CHECK(flagged);
}
