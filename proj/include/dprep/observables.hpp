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

// Observables on composite states. System observables act on the reduced
// system state, with the auxiliaries traced out.

#ifndef DPREP_OBSERVABLES_HPP
#define DPREP_OBSERVABLES_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "dprep/open_system.hpp"

namespace dprep {

struct Observable {
  enum class Kind { system_operator, fidelity, composite_diagonal };
  std::string name;
  Kind kind = Kind::system_operator;
  SparseMatrix op;      // system_operator: m x m
  DenseMatrix targets;  // fidelity: m x g, orthonormal columns spanning the target space
  RealVector diagonal;  // composite_diagonal: full composite dimension
};

Observable number_observable(const SystemModel& system);
Observable energy_observable(const SystemModel& system);
/// <H_S^2>, used to form the energy spread.
Observable energy_squared_observable(const SystemModel& system);
/// tr(P rho_sys) for the projector onto span(targets). Columns are
/// orthonormalized; `targets` is in the system model's basis.
Observable fidelity_observable(const std::string& name, const DenseMatrix& targets);
/// sum_i <t_i| rho_sys |t_i> with the columns used as given. Columns are the
/// model-space coordinates of orthonormal states, possibly only partly inside
/// the model space.
Observable projection_observable(const std::string& name, const DenseMatrix& columns);
Observable aux_population_observable(const LindbladProblem& problem, int aux, char level);
Observable operator_observable(const std::string& name, const SparseMatrix& system_op);

/// Reduced system state Tr_aux of a composite pure state or density matrix.
DenseMatrix reduced_system_state(const StateVector& psi, Index system_dim);
DenseMatrix reduced_system_state(const DenseMatrix& rho, Index system_dim);

/// Expectation value in a normalized composite state (lab frame).
double expect(const Observable& obs, const StateVector& psi, Index system_dim);
double expect(const Observable& obs, const DenseMatrix& rho, Index system_dim);
/// Directly on a reduced system state (composite_diagonal not allowed).
double expect_system(const Observable& obs, const DenseMatrix& rho_sys);

/// One observable on a time grid. std and stderr are zero for exact solvers.
struct ObservableSeries {
  std::string name;
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<double> stderr_;
};

/// Writes rows (t, observable, mean, std, stderr) for every series.
void write_series_csv(std::ostream& os, const std::vector<ObservableSeries>& series);
std::vector<ObservableSeries> read_series_csv(std::istream& is);

/// sqrt(<H^2> - <H>^2) from matching energy and energy^2 series. The
/// spread is a derived value, so its std and stderr columns are NaN.
ObservableSeries energy_spread(const ObservableSeries& energy, const ObservableSeries& energy_sq);

const ObservableSeries& find_series(const std::vector<ObservableSeries>& series, const std::string& name);

}  // namespace dprep

#endif  // DPREP_OBSERVABLES_HPP
