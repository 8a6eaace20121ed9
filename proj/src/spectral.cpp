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

#include "dprep/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <ostream>

namespace dprep {

namespace {

double operator_scale(const SparseMatrix& m) { return std::max(1.0, max_abs_entry(m)); }

// Computational basis index -> (sector position, position inside sector basis).
struct BasisMap {
  std::vector<Index> sector;
  std::vector<Index> local;
};

BasisMap basis_map(const EigenDecomposition& eig) {
  BasisMap map;
  map.sector.assign(static_cast<size_t>(eig.dimension), -1);
  map.local.assign(static_cast<size_t>(eig.dimension), -1);
  for (size_t s = 0; s < eig.sectors.size(); ++s) {
    const auto& basis = eig.sectors[s].basis;
    for (size_t k = 0; k < basis.size(); ++k) {
      map.sector[static_cast<size_t>(basis[k])] = static_cast<Index>(s);
      map.local[static_cast<size_t>(basis[k])] = static_cast<Index>(k);
    }
  }
  return map;
}

// Components of a computational-basis vector inside one sector, eigenbasis coordinates.
StateVector sector_coordinates(const Sector& sec, const StateVector& v) {
  StateVector sub(static_cast<Index>(sec.basis.size()));
  for (size_t k = 0; k < sec.basis.size(); ++k) sub(static_cast<Index>(k)) = v(sec.basis[k]);
  return sec.vectors.adjoint() * sub;
}

}  // namespace

std::optional<double> EigenDecomposition::sector_minimum(int n) const {
  const Sector* s = find_sector(n);
  if (s == nullptr || s->values.size() == 0) return std::nullopt;
  return s->values(0);
}

std::vector<Index> EigenDecomposition::sector_ground_states(int n, double tol) const {
  std::vector<Index> out;
  const Sector* s = find_sector(n);
  if (s == nullptr) return out;
  const double e0 = s->values(0);
  const double scale = std::max(1.0, std::abs(e0));
  for (Index k = 0; k < s->values.size(); ++k) {
    if (s->values(k) - e0 <= tol * scale) out.push_back(s->offset + k);
  }
  return out;
}

const Sector* EigenDecomposition::find_sector(int n) const {
  for (const Sector& s : sectors) {
    if (s.n == n) return &s;
  }
  return nullptr;
}

StateVector EigenDecomposition::state(Index alpha) const {
  const Sector& sec = sectors.at(static_cast<size_t>(sector_index.at(static_cast<size_t>(alpha))));
  const Index k = alpha - sec.offset;
  StateVector v = StateVector::Zero(dimension);
  for (size_t b = 0; b < sec.basis.size(); ++b) v(sec.basis[b]) = sec.vectors(static_cast<Index>(b), k);
  return v;
}

double EigenDecomposition::max_residual(const SparseMatrix& h) const {
  double worst = 0.0;
  for (Index a = 0; a < size(); ++a) {
    const StateVector v = state(a);
    worst = std::max(worst, (h * v - eigenvalues(a) * v).norm());
  }
  return worst;
}

EigenDecomposition diagonalize(const HermitianOperator& h, const HermitianOperator* n_op) {
  const Index dim = h.dimension();
  if (h.matrix.cols() != dim) throw ConfigError("Hamiltonian must be square");
  const double scale = operator_scale(h.matrix);
  if (hermiticity_residual(h.matrix) > 1e-12 * scale) throw ConfigError("Hamiltonian is not Hermitian");

  std::map<int, std::vector<Index>> groups;
  if (n_op != nullptr) {
    if (n_op->dimension() != dim) throw ConfigError("number operator dimension mismatch");
    const SparseMatrix comm = commutator(h.matrix, n_op->matrix);
    if (max_abs_entry(comm) > 1e-12 * scale) {
      throw ConfigError("Hamiltonian does not commute with the number operator");
    }
    const Eigen::VectorXcd diag = n_op->matrix.diagonal();
    for (Index i = 0; i < dim; ++i) {
      const double v = diag(i).real();
      const long r = std::lround(v);
      if (std::abs(v - static_cast<double>(r)) > 1e-9 || std::abs(diag(i).imag()) > 1e-12) {
        throw ConfigError("number operator must have integer diagonal");
      }
      groups[static_cast<int>(r)].push_back(i);
    }
    for (Index r = 0; r < n_op->matrix.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(n_op->matrix, r); it; ++it) {
        if (it.row() != it.col() && it.value() != Complex(0.0, 0.0)) {
          throw ConfigError("number operator must be diagonal in the computational basis");
        }
      }
    }
  } else {
    auto& all = groups[-1];
    all.resize(static_cast<size_t>(dim));
    for (Index i = 0; i < dim; ++i) all[static_cast<size_t>(i)] = i;
  }

  EigenDecomposition eig;
  eig.num_sites = h.num_sites;
  eig.dimension = dim;
  std::vector<Index> local(static_cast<size_t>(dim), -1);
  Index offset = 0;
  for (auto& [n, basis] : groups) {
    const Index b = static_cast<Index>(basis.size());
    for (Index k = 0; k < b; ++k) local[static_cast<size_t>(basis[static_cast<size_t>(k)])] = k;
    DenseMatrix block = DenseMatrix::Zero(b, b);
    for (Index k = 0; k < b; ++k) {
      for (SparseMatrix::InnerIterator it(h.matrix, basis[static_cast<size_t>(k)]); it; ++it) {
        const Index c = local[static_cast<size_t>(it.col())];
        if (c < 0) continue;
        block(k, c) = it.value();
      }
    }
    Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(block);
    if (solver.info() != Eigen::Success) throw NumericError("eigensolver failed");
    Sector sec;
    sec.n = n;
    sec.basis = basis;
    sec.values = solver.eigenvalues();
    sec.vectors = solver.eigenvectors();
    sec.offset = offset;
    offset += b;
    for (Index k = 0; k < b; ++k) local[static_cast<size_t>(basis[static_cast<size_t>(k)])] = -1;
    eig.sectors.push_back(std::move(sec));
  }
  eig.eigenvalues.resize(offset);
  eig.filling.resize(static_cast<size_t>(offset));
  eig.sector_index.resize(static_cast<size_t>(offset));
  for (size_t s = 0; s < eig.sectors.size(); ++s) {
    const Sector& sec = eig.sectors[s];
    for (Index k = 0; k < sec.values.size(); ++k) {
      eig.eigenvalues(sec.offset + k) = sec.values(k);
      eig.filling[static_cast<size_t>(sec.offset + k)] = sec.n;
      eig.sector_index[static_cast<size_t>(sec.offset + k)] = static_cast<Index>(s);
    }
  }
  return eig;
}

SparseMatrix to_eigenbasis(const EigenDecomposition& eig, const SparseMatrix& op, double drop_tol) {
  if (op.rows() != eig.dimension || op.cols() != eig.dimension) {
    throw ConfigError("operator dimension does not match the eigendecomposition");
  }
  const BasisMap map = basis_map(eig);
  Triplets trips;
  for (size_t a = 0; a < eig.sectors.size(); ++a) {
    const Sector& sa = eig.sectors[a];
    std::map<Index, DenseMatrix> blocks;
    for (size_t r = 0; r < sa.basis.size(); ++r) {
      for (SparseMatrix::InnerIterator it(op, sa.basis[r]); it; ++it) {
        const Index b = map.sector[static_cast<size_t>(it.col())];
        auto found = blocks.find(b);
        if (found == blocks.end()) {
          const Index nb = static_cast<Index>(eig.sectors[static_cast<size_t>(b)].basis.size());
          found = blocks.emplace(b, DenseMatrix::Zero(static_cast<Index>(sa.basis.size()), nb)).first;
        }
        found->second(static_cast<Index>(r), map.local[static_cast<size_t>(it.col())]) += it.value();
      }
    }
    for (auto& [b, sub] : blocks) {
      const Sector& sb = eig.sectors[static_cast<size_t>(b)];
      const DenseMatrix m = sa.vectors.adjoint() * sub * sb.vectors;
      for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
          if (std::abs(m(i, j)) >= drop_tol) trips.emplace_back(sa.offset + i, sb.offset + j, m(i, j));
        }
      }
    }
  }
  SparseMatrix out(eig.size(), eig.size());
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

DenseMatrix to_computational(const EigenDecomposition& eig, const SparseMatrix& m_eig) {
  DenseMatrix u = DenseMatrix::Zero(eig.dimension, eig.size());
  for (const Sector& sec : eig.sectors) {
    for (size_t b = 0; b < sec.basis.size(); ++b) {
      u.block(sec.basis[b], sec.offset, 1, sec.values.size()) = sec.vectors.row(static_cast<Index>(b));
    }
  }
  return u * (m_eig * u.adjoint());
}

SparseMatrix FrequencyResolvedJump::block_matrix(size_t k) const {
  Triplets trips;
  for (const Transition& t : blocks.at(k).elements) trips.emplace_back(t.to, t.from, t.s);
  SparseMatrix m(dimension, dimension);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

SparseMatrix FrequencyResolvedJump::total() const {
  Triplets trips;
  for (const FrequencyBlock& b : blocks) {
    for (const Transition& t : b.elements) trips.emplace_back(t.to, t.from, t.s);
  }
  SparseMatrix m(dimension, dimension);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

double default_eps_omega(const EigenDecomposition& eig) {
  if (eig.size() == 0) return 1e-12;
  const double width = eig.eigenvalues.maxCoeff() - eig.eigenvalues.minCoeff();
  return std::max(1e-12, 1e-9 * width);
}

FrequencyResolvedJump frequency_resolve(const SparseMatrix& s_plus, const EigenDecomposition& eig,
                                        double eps_omega) {
  if (eps_omega < 0.0) throw ConfigError("frequency bin width must be non-negative");
  const SparseMatrix m = to_eigenbasis(eig, s_plus, 1e-12);
  std::vector<Transition> all;
  for (Index r = 0; r < m.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      all.push_back({it.row(), it.col(), it.value(), eig.eigenvalues(it.row()) - eig.eigenvalues(it.col())});
    }
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Transition& a, const Transition& b) { return a.omega < b.omega; });
  FrequencyResolvedJump out;
  out.eps_omega = eps_omega;
  out.dimension = eig.size();
  for (const Transition& t : all) {
    if (out.blocks.empty() || t.omega - out.blocks.back().elements.back().omega > eps_omega) {
      out.blocks.push_back({t.omega, {}});
    }
    out.blocks.back().elements.push_back(t);
  }
  for (FrequencyBlock& b : out.blocks) {
    double sum = 0.0;
    for (const Transition& t : b.elements) sum += t.omega;
    b.omega = sum / static_cast<double>(b.elements.size());
  }
  return out;
}

std::vector<RotatingEnergy> rotating_energy(const EigenDecomposition& eig, double omega_c) {
  std::vector<RotatingEnergy> out;
  out.reserve(static_cast<size_t>(eig.size()));
  for (Index a = 0; a < eig.size(); ++a) {
    const int n = std::max(0, eig.filling[static_cast<size_t>(a)]);
    const double lam = eig.eigenvalues(a);
    out.push_back({n, lam, lam - n * omega_c});
  }
  return out;
}

FillingChoice select_filling_detailed(const EigenDecomposition& eig, double omega_c, double tie_tol) {
  if (!eig.labeled()) throw ConfigError("filling selection needs a number-resolved spectrum");
  FillingChoice choice;
  double best = std::numeric_limits<double>::infinity();
  for (const Sector& s : eig.sectors) {
    const double e = s.values(0) - s.n * omega_c;
    if (e < best) {
      best = e;
      choice.n = s.n;
    }
  }
  const double slack = tie_tol * std::max(1.0, std::abs(best));
  for (const Sector& s : eig.sectors) {
    if (s.values(0) - s.n * omega_c - best <= slack) choice.tied.push_back(s.n);
  }
  return choice;
}

int select_filling(const EigenDecomposition& eig, double omega_c) {
  return select_filling_detailed(eig, omega_c, 0.0).n;
}

std::vector<std::pair<double, int>> filling_switch_points(const EigenDecomposition& eig) {
  if (!eig.labeled()) throw ConfigError("filling selection needs a number-resolved spectrum");
  std::vector<std::pair<int, double>> minima;
  for (const Sector& s : eig.sectors) minima.emplace_back(s.n, s.values(0));
  std::vector<std::pair<double, int>> out;
  size_t cur = 0;  // lowest filling wins as omega_c -> -inf
  while (cur + 1 < minima.size()) {
    double best_slope = std::numeric_limits<double>::infinity();
    size_t next = cur;
    for (size_t m = cur + 1; m < minima.size(); ++m) {
      const double slope =
          (minima[m].second - minima[cur].second) / static_cast<double>(minima[m].first - minima[cur].first);
      if (slope <= best_slope) {
        best_slope = slope;
        next = m;
      }
    }
    out.emplace_back(best_slope, minima[next].first);
    cur = next;
  }
  return out;
}

std::pair<double, double> bohr_frequency_span(const SparseMatrix& s_plus, const EigenDecomposition& eig) {
  const SparseMatrix m = to_eigenbasis(eig, s_plus, 1e-12);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Index r = 0; r < m.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      const double w = eig.eigenvalues(it.row()) - eig.eigenvalues(it.col());
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
  }
  if (lo > hi) throw ConfigError("raising operator has no nonzero transitions");
  return {lo, hi};
}

InvariantSubspace invariant_subspace(const EigenDecomposition& eig,
                                     const std::vector<SparseMatrix>& raising_ops,
                                     const std::vector<StateVector>& start, int max_filling, double tol) {
  // Eigenspaces: runs of (numerically) equal energies inside one sector.
  struct Space {
    size_t sector;
    Index first, count;
    std::vector<StateVector> kept;  // orthonormal coordinates inside the eigenspace
  };
  std::vector<Space> spaces;
  std::vector<std::vector<size_t>> spaces_of_sector(eig.sectors.size());
  const double width = eig.size() ? std::max(1.0, eig.eigenvalues.cwiseAbs().maxCoeff()) : 1.0;
  for (size_t s = 0; s < eig.sectors.size(); ++s) {
    const Sector& sec = eig.sectors[s];
    if (max_filling >= 0 && sec.n > max_filling) continue;
    Index k = 0;
    while (k < sec.values.size()) {
      Index e = k + 1;
      while (e < sec.values.size() && sec.values(e) - sec.values(e - 1) <= 1e-9 * width) ++e;
      spaces_of_sector[s].push_back(spaces.size());
      spaces.push_back({s, k, e - k, {}});
      k = e;
    }
  }

  std::deque<std::pair<size_t, StateVector>> queue;
  auto absorb = [&](size_t sp, StateVector c) {
    Space& space = spaces[sp];
    const double initial = c.norm();
    if (initial < tol) return;
    for (int pass = 0; pass < 2; ++pass) {
      for (const StateVector& q : space.kept) c -= q * q.dot(c);
    }
    const double rest = c.norm();
    if (rest < tol || rest < 1e-8 * initial) return;
    c /= rest;
    space.kept.push_back(c);
    queue.emplace_back(sp, c);
  };
  auto absorb_vector = [&](const StateVector& v) {
    for (size_t s = 0; s < eig.sectors.size(); ++s) {
      if (spaces_of_sector[s].empty()) continue;
      const StateVector coords = sector_coordinates(eig.sectors[s], v);
      for (size_t sp : spaces_of_sector[s]) absorb(sp, coords.segment(spaces[sp].first, spaces[sp].count));
    }
  };

  for (const StateVector& v : start) {
    if (v.size() != eig.dimension) throw ConfigError("start vector dimension mismatch");
    absorb_vector(v);
  }
  std::vector<SparseMatrix> ops;
  for (const SparseMatrix& op : raising_ops) {
    ops.push_back(op);
    ops.emplace_back(op.adjoint());
  }
  auto embed = [&](size_t sp, const StateVector& c) {
    const Space& space = spaces[sp];
    const Sector& sec = eig.sectors[space.sector];
    const StateVector local = sec.vectors.middleCols(space.first, space.count) * c;
    StateVector full = StateVector::Zero(eig.dimension);
    for (size_t b = 0; b < sec.basis.size(); ++b) full(sec.basis[b]) = local(static_cast<Index>(b));
    return full;
  };
  while (!queue.empty()) {
    auto [sp, c] = queue.front();
    queue.pop_front();
    const StateVector full = embed(sp, c);
    for (const SparseMatrix& op : ops) absorb_vector(op * full);
  }

  InvariantSubspace out;
  Index m = 0;
  for (const Space& s : spaces) m += static_cast<Index>(s.kept.size());
  out.basis.resize(eig.dimension, m);
  out.energies.resize(m);
  out.filling.resize(static_cast<size_t>(m));
  Index col = 0;
  for (size_t sp = 0; sp < spaces.size(); ++sp) {
    const Space& space = spaces[sp];
    const Sector& sec = eig.sectors[space.sector];
    const RealVector vals = sec.values.segment(space.first, space.count);
    for (const StateVector& c : space.kept) {
      out.basis.col(col) = embed(sp, c);
      out.energies(col) = c.cwiseAbs2().dot(vals);
      out.filling[static_cast<size_t>(col)] = sec.n;
      ++col;
    }
  }
  return out;
}

InvariantSubspace full_subspace(const EigenDecomposition& eig) {
  InvariantSubspace out;
  out.basis = DenseMatrix::Zero(eig.dimension, eig.size());
  for (Index a = 0; a < eig.size(); ++a) out.basis.col(a) = eig.state(a);
  out.energies = eig.eigenvalues;
  out.filling = eig.filling;
  return out;
}

void write_spectrum_csv(std::ostream& os, const EigenDecomposition& eig) {
  os << "n,index,lambda\n";
  char buf[96];
  for (const Sector& sec : eig.sectors) {
    for (Index k = 0; k < sec.values.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%d,%lld,%.17g\n", sec.n, static_cast<long long>(k), sec.values(k));
      os << buf;
    }
  }
}

}  // namespace dprep
