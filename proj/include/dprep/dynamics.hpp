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

// Time evolution: dense master equation, quantum trajectories and the
// steady state of time-independent problems.

#ifndef DPREP_DYNAMICS_HPP
#define DPREP_DYNAMICS_HPP

#include <cstdint>
#include <limits>
#include <vector>

#include "dprep/observables.hpp"
#include "dprep/ode.hpp"
#include "dprep/open_system.hpp"

namespace dprep {

struct EvolveOptions {
  OdeOptions ode;
  double secular_cutoff = std::numeric_limits<double>::infinity();
  /// Smallest eigenvalue of rho at every grid point (costs a dense eigensolve).
  bool check_positivity = true;
};

struct EvolveDiagnostics {
  double max_trace_error = 0.0;
  double min_eigenvalue = 0.0;
  double max_hermiticity_error = 0.0;
  long steps = 0;
  long rejected = 0;
};

struct EvolveResult {
  std::vector<double> times;
  std::vector<ObservableSeries> series;
  DenseMatrix final_state;  // lab frame
  EvolveDiagnostics diagnostics;
};

/// Integrates the master equation from rho0 at times.front() and samples the
/// observables on `times` (ascending).
EvolveResult lindblad_evolve(const LindbladProblem& problem, const DenseMatrix& rho0, const std::vector<double>& times,
                             const std::vector<Observable>& observables, const EvolveOptions& options = {});

struct TrajectoryOptions {
  OdeOptions ode;
  double secular_cutoff = std::numeric_limits<double>::infinity();
  int workers = 1;
  double jump_time_tol = 1e-10;
  /// Keep every jump (time, channel) per trajectory.
  bool record_jumps = false;
};

struct JumpRecord {
  double t;
  int channel;
};

struct TrajectoryResult {
  int num_trajectories = 0;
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<ObservableSeries> series;  // ensemble mean, sample std and standard error
  /// samples[o][k][i]: observable o at grid point k in trajectory i.
  std::vector<std::vector<std::vector<double>>> samples;
  std::vector<std::vector<JumpRecord>> jumps;  // filled when record_jumps is set
  long total_jumps = 0;
  long steps = 0;
};

/// Monte Carlo wave functions. Trajectory i draws from its own generator
/// seeded by (seed, i), so results do not depend on the worker count.
TrajectoryResult mcwf_run(const LindbladProblem& problem, const StateVector& psi0, const std::vector<double>& times,
                          int num_trajectories, std::uint64_t seed, const std::vector<Observable>& observables,
                          const TrajectoryOptions& options = {});

/// splitmix64 step applied to seed and stream index.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

struct SteadyStateResult {
  DenseMatrix rho;             // trace one
  int kernel_dimension = 1;    // > 1 means the steady state is not unique
  double residual = 0.0;       // || L[rho] ||_max
};

/// Liouvillian superoperator on column-stacked density matrices.
SparseMatrix liouvillian(const LindbladProblem& problem);

/// Null space of the Liouvillian of a time-independent problem. Small
/// problems use a dense rank-revealing LU; larger ones a sparse LU with the
/// trace condition in place of one row. A degenerate kernel is reported in
/// kernel_dimension; rho is then one member of it. The sparse path only
/// detects degeneracy (from a condition estimate) and reports 2.
SteadyStateResult steady_state(const LindbladProblem& problem);

/// Population-weighted matrix of a pure composite state.
DenseMatrix density_matrix(const StateVector& psi);

/// Composite pure state psi_sys (x) |g ... g>.
StateVector product_with_ground(const LindbladProblem& problem, const StateVector& psi_sys);

}  // namespace dprep

#endif  // DPREP_DYNAMICS_HPP
