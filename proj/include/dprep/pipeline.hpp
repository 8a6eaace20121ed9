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

// Experiment configuration and the staged pipeline behind the CLI:
// spectrum -> protocol -> dynamics, each stage reading the serialized
// output of the previous one. docs/config.md describes the file format.

#ifndef DPREP_PIPELINE_HPP
#define DPREP_PIPELINE_HPP

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dprep/dynamics.hpp"
#include "dprep/lattice.hpp"
#include "dprep/schedules.hpp"
#include "dprep/spectral.hpp"
#include "dprep/tuning.hpp"

namespace dprep {

/// A stage input (config file, intermediate CSV) is missing or unreadable.
class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  std::string family = "xy";  // xy | hofstadter | ising
  GeometryKind geometry = GeometryKind::chain;
  GeometryParams geometry_params;
  double V = 1.0;
  double max_distance = std::numeric_limits<double>::infinity();
  double alpha = 0.0;  // hofstadter flux
  double delta = 0.0;  // ising longitudinal field
};

struct AuxConfig {
  AuxLevels levels = AuxLevels::reduced;
  Frame frame = Frame::lab;
  EffectiveAmplitude amplitude = EffectiveAmplitude::resolved;
  double J = 1.0;
  double omega = 0.0;
  std::optional<double> gamma;
  std::optional<double> Gamma;
  std::optional<double> omega_i;
  std::vector<double> attach;  // empty = uniform
};

/// One explicitly listed auxiliary (protocol kind "explicit").
struct ExplicitAux {
  AuxSchedule schedule;
  std::optional<std::vector<double>> attach;
};

struct ProtocolConfig {
  std::string kind = "ground";  // ground | highest | window | explicit
  std::optional<double> omega_c;  // empty = midpoint of the target filling's interval
  double omega_minus = 0.0;
  double omega_plus = 0.0;
  ProtocolOptions options;
  double pad = 0.05;
  std::optional<Band> band;
  std::vector<ExplicitAux> explicit_aux;
};

struct TargetConfig {
  std::string kind = "none";  // none | filling | eigenstate | window
  int filling = -1;
  Index eigenstate = -1;
  double lo = 0.0;
  double hi = 0.0;
};

struct InitialConfig {
  std::string kind = "vacuum";  // vacuum | occupied | eigenstate
  std::vector<int> sites;
  Index eigenstate = 0;
};

struct SolverConfig {
  std::string method = "trajectories";  // dense | trajectories | steady
  double t_max = 0.0;
  int grid = 101;
  int n_traj = 500;
  OdeOptions ode;
  double secular_cutoff = std::numeric_limits<double>::infinity();
  bool reduce = true;
  int max_filling = -1;
  bool check_positivity = true;
};

struct OptimizeConfig {
  bool enabled = false;
  std::vector<ParameterBound> parameters;  // names: J, omega, gamma
  int budget = 100;
  int initial_design = 10;
  int batch = 1;
  /// Objective: target fidelity at t_max (steady value for the steady
  /// method), minus time_penalty * (first grid time where the fidelity
  /// reaches `threshold`, t_max if never) / t_max.
  double time_penalty = 0.0;
  double threshold = 0.9;
};

struct ExperimentConfig {
  std::string name;
  std::string units = "J";  // J | V
  std::uint64_t seed = 0;
  std::string output;
  ModelConfig model;
  AuxConfig aux;
  ProtocolConfig protocol;
  TargetConfig target;
  InitialConfig initial;
  SolverConfig solver;
  std::vector<std::string> observables;
  std::vector<AuxConfig> sweep;  // auxiliary settings per sweep point
  OptimizeConfig optimize;
  std::string canonical;         // normalized JSON text, the hash input
};

/// Parses and validates a JSON config; unknown keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// git-style SHA-1 of the canonical config text ("blob <len>\0<text>").
std::string config_hash(const ExperimentConfig& config);

// Stage 1: spectrum.
HermitianOperator build_hamiltonian(const ModelConfig& model);
EigenDecomposition compute_spectrum(const ExperimentConfig& config);

struct SpectrumTable {
  std::vector<int> n;
  std::vector<double> lambda;
};
SpectrumTable read_spectrum_table(std::istream& is);
/// Values-only decomposition, enough for filling selection.
EigenDecomposition spectrum_from_table(const SpectrumTable& table);
/// Span of lambda_{n+1} - lambda_n over adjacent sectors (selection rules ignored).
Band transition_band(const SpectrumTable& table);

// Stage 2: protocol.
Protocol compute_protocol(const ExperimentConfig& config, const SpectrumTable& table, double duration);
/// omega_c in the middle of the interval where filling n is selected. For
/// the highest-state protocol the selection is argmax_n (lambda_n - n omega_c).
/// Unbounded sides of the interval are closed by the band edge.
double auto_omega_c(const EigenDecomposition& values, const Band& band, int n, bool highest = false);

// Stage 3: dynamics.
struct PreparedProblem {
  EigenDecomposition eig;
  InvariantSubspace subspace;
  SystemModel system;
  LindbladProblem problem;
  StateVector psi0;  // composite, lab frame
  std::vector<Observable> observables;
  std::vector<std::string> warnings;
};
PreparedProblem prepare_problem(const ExperimentConfig& config, const AuxConfig& aux,
                                const std::vector<AuxSchedule>& schedules);

/// Coordinates of global eigenstates in the dynamics basis (one column each).
DenseMatrix eigenstate_coordinates(const EigenDecomposition& eig, const SystemModel& system,
                                   const std::vector<Index>& states);

struct DynamicsOutput {
  std::vector<ObservableSeries> series;
  Index system_dim = 0;     // dynamics basis of the system
  Index composite_dim = 0;  // system times auxiliaries
  EvolveDiagnostics dense;
  long total_jumps = 0;
  int kernel_dimension = 0;  // steady method
  double steady_residual = 0.0;
  std::vector<std::string> warnings;
};
/// method overrides config.solver.method when non-empty.
DynamicsOutput run_dynamics(const ExperimentConfig& config, const AuxConfig& aux,
                            const std::vector<AuxSchedule>& schedules, int workers, const std::string& method = "");

std::vector<double> time_grid(const SolverConfig& solver);

/// Objective used by `optimize`: evaluates the configured dynamics with the
/// auxiliary parameters replaced by `x` (names from config.optimize).
double fidelity_objective(const ExperimentConfig& config, const std::vector<AuxSchedule>& schedules,
                          const std::vector<double>& x, int workers);

}  // namespace dprep

#endif  // DPREP_PIPELINE_HPP
