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

#include "dprep/lattice.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace dprep {

namespace {

void check_sites(int n, int max_sites) {
  if (n < 1) throw ConfigError("system needs at least one site");
  if (n > max_sites) {
    throw ConfigError("system of " + std::to_string(n) + " sites exceeds the configured limit of " +
                      std::to_string(max_sites));
  }
}

double wrap(double d, int extent) {
  if (extent <= 0) return d;
  d = std::fmod(d, static_cast<double>(extent));
  if (d > 0.5 * extent) d -= extent;
  if (d < -0.5 * extent) d += extent;
  return d;
}

}  // namespace

double Geometry::distance(int i, int j) const {
  Eigen::Vector2d d = sites.at(i) - sites.at(j);
  if (kind == GeometryKind::torus) {
    d.x() = wrap(d.x(), lx);
    d.y() = wrap(d.y(), ly);
  }
  return d.norm();
}

Geometry make_chain(int n) {
  if (n < 1) throw ConfigError("chain length must be >= 1");
  Geometry g;
  g.kind = GeometryKind::chain;
  for (int i = 0; i < n; ++i) g.sites.emplace_back(static_cast<double>(i), 0.0);
  return g;
}

Geometry make_hexagon() {
  Geometry g;
  g.kind = GeometryKind::hexagon;
  // unit circumradius equals unit edge for a regular hexagon
  for (int k = 0; k < 6; ++k) {
    const double a = std::numbers::pi / 3.0 * k;
    g.sites.emplace_back(std::cos(a), std::sin(a));
  }
  return g;
}

Geometry make_torus(int lx, int ly) {
  if (lx < 2 || ly < 2) throw ConfigError("torus requires lx, ly >= 2");
  Geometry g;
  g.kind = GeometryKind::torus;
  g.lx = lx;
  g.ly = ly;
  for (int y = 0; y < ly; ++y) {
    for (int x = 0; x < lx; ++x) g.sites.emplace_back(static_cast<double>(x), static_cast<double>(y));
  }
  return g;
}

Geometry build_geometry(GeometryKind kind, const GeometryParams& params) {
  switch (kind) {
    case GeometryKind::chain:
      return make_chain(params.n);
    case GeometryKind::hexagon:
      return make_hexagon();
    case GeometryKind::torus:
      return make_torus(params.lx, params.ly);
  }
  throw ConfigError("unknown geometry kind");
}

GeometryKind parse_geometry_kind(const std::string& name) {
  if (name == "chain") return GeometryKind::chain;
  if (name == "hexagon") return GeometryKind::hexagon;
  if (name == "torus") return GeometryKind::torus;
  throw ConfigError("unknown geometry kind '" + name + "'");
}

CouplingMatrix dipolar_couplings(const Geometry& geom, double v_nn, double max_distance) {
  const int n = geom.size();
  if (n < 1) throw ConfigError("empty geometry");
  CouplingMatrix c = CouplingMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = geom.distance(i, j);
      if (d <= 0.0) throw ConfigError("coincident sites in geometry");
      if (d > max_distance + 1e-12) continue;
      c(i, j) = c(j, i) = v_nn / (d * d * d);
    }
  }
  return c;
}

std::string HermitianOperator::label(Index basis_index) const {
  std::string s(static_cast<size_t>(num_sites), '0');
  for (int i = 0; i < num_sites; ++i) {
    if ((basis_index >> i) & 1) s[static_cast<size_t>(i)] = '1';
  }
  return s;
}

HermitianOperator build_xy(const CouplingMatrix& c, int max_sites) {
  const int n = static_cast<int>(c.rows());
  check_sites(n, max_sites);
  if (c.cols() != n || (c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ConfigError("coupling matrix must be square and symmetric");
  }
  const Index dim = Index{1} << n;
  Triplets trips;
  for (Index s = 0; s < dim; ++s) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (c(i, j) == 0.0) continue;
        const bool oi = (s >> i) & 1;
        const bool oj = (s >> j) & 1;
        if (oi == oj) continue;
        const Index t = s ^ (Index{1} << i) ^ (Index{1} << j);
        trips.emplace_back(t, s, -c(i, j));
      }
    }
  }
  HermitianOperator h;
  h.num_sites = n;
  h.matrix.resize(dim, dim);
  h.matrix.setFromTriplets(trips.begin(), trips.end());
  h.matrix.makeCompressed();
  return h;
}

HermitianOperator build_hofstadter_hardcore(int lx, int ly, double alpha, double v, Boundary boundary,
                                            int max_sites) {
  if (boundary != Boundary::torus) throw ConfigError("Hofstadter model is only defined on the torus");
  if (lx < 2 || ly < 2) throw ConfigError("torus requires lx, ly >= 2");
  const int n = lx * ly;
  check_sites(n, max_sites);
  auto site = [&](int x, int y) { return ((x % lx + lx) % lx) + lx * ((y % ly + ly) % ly); };

  struct Hop {
    int from, to;
    Complex amp;
  };
  std::vector<Hop> hops;
  for (int y = 0; y < ly; ++y) {
    for (int x = 0; x < lx; ++x) {
      const Complex peierls = std::polar(1.0, 2.0 * std::numbers::pi * alpha * y);
      hops.push_back({site(x, y), site(x + 1, y), v * peierls});
      hops.push_back({site(x, y), site(x, y + 1), Complex(v, 0.0)});
    }
  }
  const Index dim = Index{1} << n;
  Triplets trips;
  for (Index s = 0; s < dim; ++s) {
    for (const Hop& h : hops) {
      // a+_to a_from and its conjugate a+_from a_to
      if (((s >> h.from) & 1) && !((s >> h.to) & 1)) {
        const Index t = s ^ (Index{1} << h.from) ^ (Index{1} << h.to);
        trips.emplace_back(t, s, h.amp);
        trips.emplace_back(s, t, std::conj(h.amp));
      }
    }
  }
  HermitianOperator op;
  op.num_sites = n;
  op.matrix.resize(dim, dim);
  op.matrix.setFromTriplets(trips.begin(), trips.end());
  op.matrix.prune(Complex(0.0, 0.0), 1e-300);
  op.matrix.makeCompressed();
  return op;
}

HermitianOperator build_ising_longitudinal(const CouplingMatrix& c, double delta, int max_sites) {
  const int n = static_cast<int>(c.rows());
  check_sites(n, max_sites);
  if (c.cols() != n) throw ConfigError("coupling matrix must be square");
  const Index dim = Index{1} << n;
  Triplets trips;
  trips.reserve(static_cast<size_t>(dim));
  for (Index s = 0; s < dim; ++s) {
    double e = 0.0;
    for (int i = 0; i < n; ++i) {
      const double zi = ((s >> i) & 1) ? 0.5 : -0.5;
      e += delta * zi;
      for (int j = i + 1; j < n; ++j) {
        const double zj = ((s >> j) & 1) ? 0.5 : -0.5;
        e += c(i, j) * zi * zj;
      }
    }
    trips.emplace_back(s, s, e);
  }
  HermitianOperator h;
  h.num_sites = n;
  h.matrix.resize(dim, dim);
  h.matrix.setFromTriplets(trips.begin(), trips.end());
  h.matrix.makeCompressed();
  return h;
}

HermitianOperator number_operator(int num_sites) {
  check_sites(num_sites, 30);
  const Index dim = Index{1} << num_sites;
  Triplets trips;
  for (Index s = 1; s < dim; ++s) trips.emplace_back(s, s, static_cast<double>(popcount(s)));
  HermitianOperator h;
  h.num_sites = num_sites;
  h.matrix.resize(dim, dim);
  h.matrix.setFromTriplets(trips.begin(), trips.end());
  h.matrix.makeCompressed();
  return h;
}

SparseMatrix raising_operator(int num_sites, const std::vector<double>& weights) {
  check_sites(num_sites, 30);
  if (!weights.empty() && static_cast<int>(weights.size()) != num_sites) {
    throw ConfigError("attach weights must have one entry per system site");
  }
  const Index dim = Index{1} << num_sites;
  Triplets trips;
  for (Index s = 0; s < dim; ++s) {
    for (int i = 0; i < num_sites; ++i) {
      const double w = weights.empty() ? 1.0 : weights[static_cast<size_t>(i)];
      if (w == 0.0 || ((s >> i) & 1)) continue;
      trips.emplace_back(s | (Index{1} << i), s, w);
    }
  }
  SparseMatrix m(dim, dim);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

SparseMatrix sz_operator(int num_sites, int site) {
  const Index dim = Index{1} << num_sites;
  Triplets trips;
  for (Index s = 0; s < dim; ++s) trips.emplace_back(s, s, ((s >> site) & 1) ? 0.5 : -0.5);
  SparseMatrix m(dim, dim);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

StateVector occupation_state(int num_sites, const std::vector<int>& occupied) {
  const Index dim = Index{1} << num_sites;
  Index s = 0;
  for (int i : occupied) {
    if (i < 0 || i >= num_sites) throw ConfigError("occupied site index out of range");
    s |= Index{1} << i;
  }
  StateVector v = StateVector::Zero(dim);
  v(s) = 1.0;
  return v;
}

void write_triplets(std::ostream& os, const SparseMatrix& m) {
  os << "%dprep-triplet " << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  char buf[128];
  for (Index r = 0; r < m.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      std::snprintf(buf, sizeof buf, "%lld %lld %.17g %.17g\n", static_cast<long long>(it.row()),
                    static_cast<long long>(it.col()), it.value().real(), it.value().imag());
      os << buf;
    }
  }
}

SparseMatrix read_triplets(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty triplet stream");
  std::istringstream header(line);
  std::string tag;
  long long rows = 0, cols = 0, nnz = 0;
  if (!(header >> tag >> rows >> cols >> nnz) || tag != "%dprep-triplet" || rows < 0 || cols < 0) {
    throw ConfigError("bad triplet header: " + line);
  }
  Triplets trips;
  trips.reserve(static_cast<size_t>(nnz));
  for (long long k = 0; k < nnz; ++k) {
    long long r = 0, c = 0;
    double re = 0.0, im = 0.0;
    if (!(is >> r >> c >> re >> im)) throw ConfigError("truncated triplet stream");
    if (r < 0 || r >= rows || c < 0 || c >= cols) throw ConfigError("triplet index out of range");
    trips.emplace_back(r, c, Complex(re, im));
  }
  SparseMatrix m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

}  // namespace dprep
