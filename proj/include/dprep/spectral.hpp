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

// Sector-resolved exact diagonalization and frequency-resolved operators.

#ifndef DPREP_SPECTRAL_HPP
#define DPREP_SPECTRAL_HPP

#include <iosfwd>
#include <optional>
#include <vector>

#include "dprep/lattice.hpp"

namespace dprep {

/// One block of a block-diagonal Hamiltonian.
struct Sector {
  int n = -1;                // filling, -1 when no number operator was given
  std::vector<Index> basis;  // computational basis indices spanned by the block
  RealVector values;         // ascending
  DenseMatrix vectors;       // basis.size() x basis.size(), columns are eigenvectors
  Index offset = 0;          // global index of the first eigenstate of this block
};

/// Eigenstates are globally indexed by sector (ascending n), then energy.
struct EigenDecomposition {
  int num_sites = 0;
  Index dimension = 0;
  std::vector<Sector> sectors;
  RealVector eigenvalues;
  std::vector<int> filling;         // per global eigenstate
  std::vector<Index> sector_index;  // per global eigenstate, position in `sectors`

  Index size() const { return eigenvalues.size(); }
  bool labeled() const { return !sectors.empty() && sectors.front().n >= 0; }
  /// Lowest energy in sector n; nullopt if the sector is absent.
  std::optional<double> sector_minimum(int n) const;
  /// Global indices of the eigenstates degenerate with the sector-n minimum.
  std::vector<Index> sector_ground_states(int n, double tol = 1e-9) const;
  const Sector* find_sector(int n) const;
  /// Eigenvector alpha in the computational basis.
  StateVector state(Index alpha) const;
  /// max over states of |H v - lambda v|.
  double max_residual(const SparseMatrix& h) const;
};

/// Dense diagonalization; block-diagonal per filling when n_op is given.
/// n_op must be diagonal in the computational basis and commute with h.
EigenDecomposition diagonalize(const HermitianOperator& h, const HermitianOperator* n_op = nullptr);

/// Matrix of `op` between eigenstates, entries below drop_tol removed.
SparseMatrix to_eigenbasis(const EigenDecomposition& eig, const SparseMatrix& op,
                           double drop_tol = 1e-12);
/// Inverse map for an operator given in the global eigenbasis.
DenseMatrix to_computational(const EigenDecomposition& eig, const SparseMatrix& m_eig);

struct Transition {
  Index to = 0;    // eigenstate index lambda
  Index from = 0;  // eigenstate index lambda'
  Complex s;       // <lambda| S+ |lambda'>
  double omega = 0.0;
};

struct FrequencyBlock {
  double omega = 0.0;  // mean Bohr frequency of the bin
  std::vector<Transition> elements;
};

/// S+ split by Bohr frequency, sum_w S+(w) = S+.
struct FrequencyResolvedJump {
  double eps_omega = 0.0;
  Index dimension = 0;  // number of eigenstates
  std::vector<FrequencyBlock> blocks;

  /// Block k as a sparse matrix in the global eigenbasis.
  SparseMatrix block_matrix(size_t k) const;
  /// All blocks summed, in the global eigenbasis.
  SparseMatrix total() const;
};

/// Default bin width, 1e-9 times the spectral width (1e-12 floor).
double default_eps_omega(const EigenDecomposition& eig);

/// Bins are formed by single-linkage clustering of sorted frequencies.
FrequencyResolvedJump frequency_resolve(const SparseMatrix& s_plus, const EigenDecomposition& eig,
                                        double eps_omega);

struct RotatingEnergy {
  int n = 0;
  double lambda = 0.0;
  double e_rot = 0.0;
};
/// lambda - n omega_c for every eigenstate.
std::vector<RotatingEnergy> rotating_energy(const EigenDecomposition& eig, double omega_c);

struct FillingChoice {
  int n = 0;
  /// Sectors within tie_tol of the minimum, including n. More than one entry
  /// means the stationary filling is not determined by the energy rule alone.
  std::vector<int> tied;
};

/// argmin_n (lambda_n - n omega_c); ties go to the smaller n.
int select_filling(const EigenDecomposition& eig, double omega_c);
FillingChoice select_filling_detailed(const EigenDecomposition& eig, double omega_c,
                                      double tie_tol = 1e-9);

/// Values of omega_c where the selected filling changes, ascending, with the
/// filling chosen just above each point.
std::vector<std::pair<double, int>> filling_switch_points(const EigenDecomposition& eig);

/// [min, max] of Bohr frequencies lambda - lambda' over nonzero S+ elements.
std::pair<double, double> bohr_frequency_span(const SparseMatrix& s_plus,
                                              const EigenDecomposition& eig);

/// Smallest subspace containing the start vectors that is invariant under
/// H (diagonal in `energies`) and the given raising operators and their
/// adjoints. Columns are eigenvectors of H, so dynamics restricted to this
/// subspace is exact.
struct InvariantSubspace {
  DenseMatrix basis;  // computational dim x m, orthonormal columns
  RealVector energies;
  std::vector<int> filling;
  Index size() const { return energies.size(); }
  /// Coordinates of a computational-basis vector in this subspace.
  StateVector project(const StateVector& v) const { return basis.adjoint() * v; }
  /// Operator restricted to the subspace.
  DenseMatrix restrict(const SparseMatrix& op) const { return basis.adjoint() * (op * basis); }
};

/// max_filling < 0 disables truncation. Truncating drops the sectors above
/// max_filling and makes the restricted dynamics approximate.
InvariantSubspace invariant_subspace(const EigenDecomposition& eig,
                                     const std::vector<SparseMatrix>& raising_ops,
                                     const std::vector<StateVector>& start, int max_filling = -1,
                                     double tol = 1e-10);

/// Whole space, every eigenvector.
InvariantSubspace full_subspace(const EigenDecomposition& eig);

/// CSV with header "n,index,lambda".
void write_spectrum_csv(std::ostream& os, const EigenDecomposition& eig);

}  // namespace dprep

#endif  // DPREP_SPECTRAL_HPP
