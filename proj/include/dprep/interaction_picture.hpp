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

// A Lindblad problem in the interaction picture of its real diagonal part.
//
// With D(t) = static_diagonal + sum_k Delta_k(t) pattern_k and
// theta(t) = integral_0^t D, states are carried as phi = P^-1 psi with
// P(t) = diag(exp(-i theta(t))). The remaining generator
//   K(t) = P^-1 (H(t) - D(t) - i/2 sum_k L_k^dagger L_k) P
// has entries env(t) v exp(i (nu t + kappa . I(t))), where I_s = integral of
// Delta_s. Large diagonal energies then cost nothing; only the couplings
// set the step size.
//
// An optional secular cutoff drops Hamiltonian entries whose instantaneous
// frequency nu + kappa . Delta(t) exceeds the cutoff (cos^2 taper over
// [cutoff, 1.5 cutoff]). The default is no cutoff, which is exact.

#ifndef DPREP_INTERACTION_PICTURE_HPP
#define DPREP_INTERACTION_PICTURE_HPP

#include <limits>
#include <memory>
#include <vector>

#include "dprep/open_system.hpp"

namespace dprep {

class InteractionPicture {
 public:
  explicit InteractionPicture(const LindbladProblem& problem,
                              double secular_cutoff = std::numeric_limits<double>::infinity());

  Index dimension() const { return shared_->dim; }
  size_t num_jumps() const { return shared_->jumps.size(); }
  double secular_cutoff() const { return shared_->cutoff; }

  /// K(t); the returned matrix is owned by this object and overwritten by the
  /// next call. Copies of an InteractionPicture share the compiled data and
  /// have independent workspaces.
  const SparseMatrix& generator(double t);
  /// P^-1 L_k P at time t.
  const SparseMatrix& jump(size_t k, double t);

  /// psi = P(t) phi.
  void to_lab(double t, const StateVector& phi, StateVector& psi) const;
  /// phi = P(t)^-1 psi.
  void from_lab(double t, const StateVector& psi, StateVector& phi) const;
  /// rho = P sigma P^dagger.
  void to_lab(double t, const DenseMatrix& sigma, DenseMatrix& rho) const;
  void from_lab(double t, const DenseMatrix& rho, DenseMatrix& sigma) const;

  /// Number of stored generator contributions (diagnostics).
  size_t generator_terms() const;

 private:
  struct Contribution {
    Index slot;
    Index row, col;
    Complex value;
    double nu;
    int group;     // index of the kappa vector
    int phase;     // index of the term's own phase law
    int envelope;  // -1 for none
  };
  struct Compiled {
    Index dim = 0;
    double cutoff = 0.0;
    RealVector diag;                             // static real diagonal
    std::vector<RealVector> patterns;            // per detuning term
    std::vector<int> pattern_schedule;
    std::vector<DetuningSchedule> schedules;
    std::vector<std::vector<double>> groups;     // kappa vectors over schedules
    std::vector<double> phase_rates;             // term phase laws (rate, law over schedules)
    std::vector<std::vector<double>> phase_laws;
    std::vector<Envelope> envelopes;
    // generator: constant contributions, then secular ones sorted by (group, nu)
    SparseMatrix k_pattern;
    std::vector<Contribution> k_fixed;
    std::vector<Contribution> k_secular;
    std::vector<std::pair<size_t, size_t>> secular_range;  // per group [begin, end)
    std::vector<SparseMatrix> jump_pattern;
    std::vector<std::vector<Contribution>> jumps;
  };

  void theta(double t, RealVector& out) const;
  void evaluate_context(double t);
  Complex term_value(const Contribution& c) const;

  std::shared_ptr<const Compiled> shared_;
  SparseMatrix k_work_;
  std::vector<SparseMatrix> jump_work_;
  std::vector<double> group_freq_;
  std::vector<Complex> phase_values_;
  RealVector theta_;
  StateVector row_phase_;
  std::vector<Complex> env_values_;
};

}  // namespace dprep

#endif  // DPREP_INTERACTION_PICTURE_HPP
