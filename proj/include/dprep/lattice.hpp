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

// Geometries, dipolar couplings and spin-1/2 / hard-core boson Hamiltonians.
//
// Basis convention: a basis index is an occupation bitstring with site 0 in
// the least significant bit. S+ raises |0> -> |1>, S^z = +-1/2.

#ifndef DPREP_LATTICE_HPP
#define DPREP_LATTICE_HPP

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "dprep/types.hpp"

namespace dprep {

enum class GeometryKind { chain, hexagon, torus };

struct Geometry {
  GeometryKind kind = GeometryKind::chain;
  std::vector<Eigen::Vector2d> sites;
  int lx = 0;  // torus extents, zero otherwise
  int ly = 0;

  int size() const { return static_cast<int>(sites.size()); }
  /// Euclidean distance; minimum-image convention on the torus.
  double distance(int i, int j) const;
};

Geometry make_chain(int n);
Geometry make_hexagon();
Geometry make_torus(int lx, int ly);

struct GeometryParams {
  int n = 0;
  int lx = 0;
  int ly = 0;
};
Geometry build_geometry(GeometryKind kind, const GeometryParams& params);
GeometryKind parse_geometry_kind(const std::string& name);

/// Symmetric, zero-diagonal real coupling matrix (energy units).
using CouplingMatrix = Eigen::MatrixXd;

/// V_ij = v_nn / d_ij^3 for all pairs with d_ij <= max_distance.
CouplingMatrix dipolar_couplings(const Geometry& geom, double v_nn,
                                 double max_distance = std::numeric_limits<double>::infinity());

/// Sparse Hermitian operator on the 2^N occupation basis.
struct HermitianOperator {
  SparseMatrix matrix;
  int num_sites = 0;

  Index dimension() const { return matrix.rows(); }
  /// Occupation bitstring for a basis index, site 0 printed first.
  std::string label(Index basis_index) const;
};

inline constexpr int kDefaultMaxSites = 16;

/// -sum_{i<j} V_ij (S+_i S-_j + h.c.).
HermitianOperator build_xy(const CouplingMatrix& c, int max_sites = kDefaultMaxSites);

enum class Boundary { torus, open };

/// Hard-core Harper-Hofstadter model: V sum (e^{i 2 pi alpha y} a+_{x+1,y} a_{x,y}
/// + a+_{x,y+1} a_{x,y} + h.c.) with periodic wrap. Site index x + lx * y.
HermitianOperator build_hofstadter_hardcore(int lx, int ly, double alpha, double v,
                                            Boundary boundary = Boundary::torus,
                                            int max_sites = kDefaultMaxSites);

/// sum_{i<j} C_ij S^z_i S^z_j + delta sum_i S^z_i. Diagonal.
HermitianOperator build_ising_longitudinal(const CouplingMatrix& c, double delta,
                                           int max_sites = kDefaultMaxSites);

/// Total occupation, diag(popcount).
HermitianOperator number_operator(int num_sites);

/// sum_i w_i S+_i; empty weights means uniform weight 1.
SparseMatrix raising_operator(int num_sites, const std::vector<double>& weights = {});

/// S^z_i for one site.
SparseMatrix sz_operator(int num_sites, int site);

/// Computational-basis product state with the given sites occupied.
StateVector occupation_state(int num_sites, const std::vector<int>& occupied);

inline int popcount(Index x) { return __builtin_popcountll(static_cast<unsigned long long>(x)); }

// Sparse triplet text format:
//   line 1:  "%dprep-triplet <rows> <cols> <nnz>"
//   then one "row col re im" line per stored entry, row-major order,
//   numbers printed with 17 significant digits.
void write_triplets(std::ostream& os, const SparseMatrix& m);
SparseMatrix read_triplets(std::istream& is);

}  // namespace dprep

#endif  // DPREP_LATTICE_HPP
