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

// System + auxiliary Lindblad problems.
//
// Composite index: s + m * (a_0 + L_0 * (a_1 + L_1 * ...)), where s is the
// system state (m of them) and a_k the level of auxiliary k.
//
// Auxiliary levels:
//   full       g=0, i=1, 0=2, 1=3
//   reduced    g=0, 0=1, 1=2
//   effective  g=0, r=1   (r is |1> for a source and |0> for a sink)
//
// Source atoms decay out of |0> and are driven on g<->1; sinks decay out of
// |1> and are driven on g<->0. Both exchange J (|0><1| (x) S+ + h.c.).

#ifndef DPREP_OPEN_SYSTEM_HPP
#define DPREP_OPEN_SYSTEM_HPP

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dprep/schedules.hpp"
#include "dprep/spectral.hpp"

namespace dprep {

/// System Hamiltonian in the basis used for dynamics: either the
/// computational basis or an invariant eigen-subspace (then h is diagonal).
struct SystemModel {
  int num_sites = 0;
  SparseMatrix h;              // m x m
  std::vector<int> filling;    // per basis state
  bool eigenbasis = false;     // h is diagonal and basis states are eigenstates
  DenseMatrix basis;           // 2^N x m, empty for the computational basis

  Index size() const { return h.rows(); }
  /// sum_i w_i S+_i in this basis, entries below 1e-12 dropped.
  SparseMatrix raising(const std::vector<double>& weights) const;
  /// Coordinates of a computational-basis vector.
  StateVector project(const StateVector& v) const;
};

SystemModel computational_system(const HermitianOperator& h);
SystemModel eigen_system(int num_sites, const InvariantSubspace& subspace);

enum class AuxLevels { full, reduced, effective };
enum class Frame { lab, rotating };
enum class EffectiveAmplitude { resolved, resonant };

struct AuxiliarySpec {
  AuxRole role = AuxRole::source;
  double J = 0.0;
  double omega_drive = 0.0;
  std::optional<double> gamma;    // reduced model decay of the lossy Rydberg level
  std::optional<double> Gamma;    // full model decay of |i>
  std::optional<double> omega_i;  // full model coupling of |i> to the lossy Rydberg level
  DetuningSchedule detuning = DetuningSchedule::constant(0.0);
  std::vector<double> attach;     // per-site weights, empty = uniform
};

/// phi(t) = rate * t + coeff * integral_0^t Delta_schedule.
struct PhaseLaw {
  double rate = 0.0;
  int schedule = -1;
  double coeff = 0.0;
  bool trivial() const { return rate == 0.0 && (schedule < 0 || coeff == 0.0); }
};

using Envelope = std::function<Complex(double)>;

/// env(t) e^{i phi(t)} op.
struct ModulatedTerm {
  SparseMatrix op;
  PhaseLaw phase;
  Envelope envelope;  // empty means 1
  std::string label;
};

/// Delta_schedule(t) * diag(pattern).
struct DetuningTerm {
  RealVector pattern;
  int schedule = 0;
};

/// L(t) = sum of its parts.
struct JumpChannel {
  std::vector<ModulatedTerm> parts;
  std::string label;
};

struct LindbladProblem {
  Index system_dim = 0;
  std::vector<int> aux_levels;  // levels per auxiliary
  AuxLevels level_kind = AuxLevels::reduced;
  Frame frame = Frame::lab;
  Index dimension = 0;

  /// H(t) = diag(static_diagonal) + sum detunings + sum_k (T_k + T_k^dagger)
  /// + hermitian_terms; every coupling is stored once and its adjoint added.
  RealVector static_diagonal;
  std::vector<DetuningTerm> detunings;
  std::vector<ModulatedTerm> couplings;       // adjoint added
  std::vector<ModulatedTerm> hermitian_terms;  // already Hermitian, constant
  std::vector<JumpChannel> jumps;
  std::vector<DetuningSchedule> schedules;  // one per auxiliary
  std::vector<AuxRole> roles;

  SparseMatrix hamiltonian(double t) const;
  SparseMatrix jump(size_t k, double t) const;
  /// Every coefficient constant in time.
  bool time_independent() const;

  /// Population projector of level `level` on auxiliary `aux` (diagonal).
  RealVector aux_population(int aux, int level) const;
  /// System operator lifted to the composite space.
  SparseMatrix lift_system(const SparseMatrix& op) const;
  /// Level index of |g>, |0>, |1>, |i> for this level kind (-1 if absent).
  int level_index(int aux, char name) const;
};

LindbladProblem build_full_model(const SystemModel& system, const std::vector<AuxiliarySpec>& aux,
                                 Frame frame = Frame::lab, double eps_omega = 1e-9);
LindbladProblem build_reduced_model(const SystemModel& system, const std::vector<AuxiliarySpec>& aux,
                                    Frame frame = Frame::lab, double eps_omega = 1e-9);

struct EffectiveOptions {
  /// resolved: A = J sqrt(Gamma) Omega_i / (Omega_i^2 - d^2 + i Gamma d / 2) with
  /// d the detuning of the Bohr frequency from the auxiliary; reduces to
  /// J sqrt(Gamma) / Omega_i on resonance. resonant: that value everywhere.
  EffectiveAmplitude amplitude = EffectiveAmplitude::resolved;
  double eps_omega = 1e-9;
};
/// Needs a system in its eigenbasis.
LindbladProblem build_effective_model(const SystemModel& system, const std::vector<AuxiliarySpec>& aux,
                                      const EffectiveOptions& options = {});

/// Decay rate of a level coupled with strength omega0 to a level decaying at
/// Gamma, H = omega0 (|i><0| + h.c.), in the limit Gamma >> omega0.
double induced_decay_rate(double omega0, double Gamma);

/// Effective-model amplitude for detuning d = omega - Delta (source) or
/// Delta - omega (sink).
Complex effective_amplitude(double J, double Gamma, double omega_i, double detuning,
                            EffectiveAmplitude mode);

/// Text report: dimensions, term list and jump list.
void write_problem_summary(std::ostream& os, const LindbladProblem& problem);

}  // namespace dprep

#endif  // DPREP_OPEN_SYSTEM_HPP
