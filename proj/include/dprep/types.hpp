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

#ifndef DPREP_TYPES_HPP
#define DPREP_TYPES_HPP

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dprep {

using Complex = std::complex<double>;
using Index = Eigen::Index;

using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<Complex>;
using Triplets = std::vector<Triplet>;

using DenseMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

/// Invalid input: bad geometry, malformed config, missing parameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure at run time: step-size underflow, zero-norm state.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Max |A - A^dagger| over all entries.
template <typename Derived>
double hermiticity_residual(const Eigen::SparseMatrixBase<Derived>& a) {
  const SparseMatrix m = a.derived();
  const SparseMatrix diff = m - SparseMatrix(m.adjoint());
  double worst = 0.0;
  for (Index k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) {
      worst = std::max(worst, std::abs(it.value()));
    }
  }
  return worst;
}

/// Max absolute entry of a sparse matrix.
inline double max_abs_entry(const SparseMatrix& m) {
  double worst = 0.0;
  for (Index k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      worst = std::max(worst, std::abs(it.value()));
    }
  }
  return worst;
}

inline SparseMatrix sparse_identity(Index n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  return id;
}

inline SparseMatrix commutator(const SparseMatrix& a, const SparseMatrix& b) {
  return SparseMatrix(a * b) - SparseMatrix(b * a);
}

}  // namespace dprep

#endif  // DPREP_TYPES_HPP
